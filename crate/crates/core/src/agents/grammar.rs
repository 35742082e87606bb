//! The stage grammar a completed order's history must follow:
//! `O C R+ A D T* V I+ E`.

use std::collections::BTreeSet;
use std::fmt;

use crate::event::{Event, EventBody, InventoryReason, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Token {
    /// O: order placed.
    Order,
    /// C: supply CFP issued.
    Cfp,
    /// R: a supply proposal or refusal.
    Response,
    /// A: supply award.
    Award,
    /// D: shipment dispatched.
    Dispatch,
    /// T: vehicle movement or sensor reading while en route.
    Telemetry,
    /// V: shipment delivered.
    Delivered,
    /// I: stock received by the buyer.
    Receipt,
    /// E: delivery assessed.
    Evaluated,
}

impl Token {
    pub fn symbol(self) -> char {
        match self {
            Token::Order => 'O',
            Token::Cfp => 'C',
            Token::Response => 'R',
            Token::Award => 'A',
            Token::Dispatch => 'D',
            Token::Telemetry => 'T',
            Token::Delivered => 'V',
            Token::Receipt => 'I',
            Token::Evaluated => 'E',
        }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Reduces the log to the grammar tokens of one order. Chat, rejections,
/// alerts, the delivery negotiations and the seller's own stock movements
/// carry no token.
pub fn project(events: &[Event], order_id: &str) -> Vec<Token> {
    let mut supply_convs = BTreeSet::new();
    let mut shipments = BTreeSet::new();
    let mut buyer = None;
    let mut out = Vec::new();
    for e in events {
        let token = match &e.body {
            EventBody::OrderPlaced(p) if p.order_id == order_id => {
                buyer = Some(p.buyer.clone());
                Some(Token::Order)
            }
            EventBody::CfpIssued(p) if p.order_id == order_id && p.stage == Stage::Supply => {
                supply_convs.insert(p.conv_id.clone());
                Some(Token::Cfp)
            }
            EventBody::ProposalSubmitted(p) if supply_convs.contains(&p.conv_id) => Some(Token::Response),
            EventBody::ProposalRefused(p) if supply_convs.contains(&p.conv_id) => Some(Token::Response),
            EventBody::ProposalAccepted(p) if supply_convs.contains(&p.conv_id) => Some(Token::Award),
            EventBody::ShipmentDispatched(p) if p.order_id == order_id => {
                shipments.insert(p.shipment_id.clone());
                Some(Token::Dispatch)
            }
            EventBody::VehicleMoved(p) if shipments.contains(&p.shipment_id) => {
                Some(Token::Telemetry)
            }
            EventBody::SensorReading(p) if shipments.contains(&p.shipment_id) => {
                Some(Token::Telemetry)
            }
            EventBody::ShipmentDelivered(p) if p.order_id == order_id => Some(Token::Delivered),
            EventBody::InventoryUpdated(p)
                if p.reason == InventoryReason::Receipt
                    && p.order_id.as_deref() == Some(order_id)
                    && buyer.as_ref() == Some(&p.owner) =>
            {
                Some(Token::Receipt)
            }
            EventBody::DeliveryAssessed(p) if p.order_id == order_id => Some(Token::Evaluated),
            _ => None,
        };
        out.extend(token);
    }
    out
}

/// Arrival of the vehicle is itself a movement, so `T*` absorbs the final
/// move before `V`.
pub fn matches_stage_grammar(tokens: &[Token]) -> bool {
    use Token::*;
    // (token, may repeat, may be absent)
    const PATTERN: [(Token, bool, bool); 9] = [
        (Order, false, false),
        (Cfp, false, false),
        (Response, true, false),
        (Award, false, false),
        (Dispatch, false, false),
        (Telemetry, true, true),
        (Delivered, false, false),
        (Receipt, true, false),
        (Evaluated, false, false),
    ];
    let mut i = 0;
    for (token, repeat, optional) in PATTERN {
        let start = i;
        while i < tokens.len() && tokens[i] == token && (repeat || i == start) {
            i += 1;
        }
        if i == start && !optional {
            return false;
        }
    }
    i == tokens.len()
}

pub fn order_follows_grammar(events: &[Event], order_id: &str) -> bool {
    matches_stage_grammar(&project(events, order_id))
}

pub fn render(tokens: &[Token]) -> String {
    tokens.iter().map(|t| t.symbol()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Vec<Token> {
        s.chars()
            .map(|c| match c {
                'O' => Token::Order,
                'C' => Token::Cfp,
                'R' => Token::Response,
                'A' => Token::Award,
                'D' => Token::Dispatch,
                'T' => Token::Telemetry,
                'V' => Token::Delivered,
                'I' => Token::Receipt,
                'E' => Token::Evaluated,
                _ => panic!("bad token {c}"),
            })
            .collect()
    }

    #[test]
    fn accepts_well_formed_histories() {
        for s in ["OCRADVIE", "OCRRRADTTTTVIIIE", "OCRADTVIE"] {
            assert!(matches_stage_grammar(&parse(s)), "{s}");
            assert_eq!(render(&parse(s)), s);
        }
    }

    #[test]
    fn rejects_malformed_histories() {
        for s in ["", "OCADVIE", "OCRADVE", "OCRADVIEE", "OCRDAVIE", "OCRADVI", "OCCRADVIE", "OCRADTVTIE"] {
            assert!(!matches_stage_grammar(&parse(s)), "{s}");
        }
    }
}
