//! Message bus with "latest prior message" query semantics.
//!
//! Each agent's records are kept in publication order. A query at time `t`
//! returns, per agent, the message with the largest timestamp `t_i <= t`
//! whose record is already available (`available_from <= t`).

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use crate::error::{Error, Result};
use crate::geometry::AgentId;
use crate::v2x::message::{DetectionMessage, EarlyMessage};

pub trait BusMessage {
    fn agent_id(&self) -> AgentId;
    fn timestamp(&self) -> f64;
}

impl BusMessage for DetectionMessage {
    fn agent_id(&self) -> AgentId {
        self.agent_id
    }
    fn timestamp(&self) -> f64 {
        self.t_i
    }
}

impl BusMessage for EarlyMessage {
    fn agent_id(&self) -> AgentId {
        self.agent_id
    }
    fn timestamp(&self) -> f64 {
        self.t_i
    }
}

#[derive(Debug)]
pub struct BusRecord<M> {
    pub message: Arc<M>,
    pub available_from: f64,
}

impl<M> Clone for BusRecord<M> {
    fn clone(&self) -> Self {
        Self {
            message: Arc::clone(&self.message),
            available_from: self.available_from,
        }
    }
}

#[derive(Debug)]
pub struct MessageBus<M> {
    records: RwLock<BTreeMap<AgentId, Vec<BusRecord<M>>>>,
}

impl<M> Default for MessageBus<M> {
    fn default() -> Self {
        Self {
            records: RwLock::new(BTreeMap::new()),
        }
    }
}

impl<M: BusMessage> MessageBus<M> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `message`, available `latency` seconds after its timestamp.
    pub fn publish(&self, message: M, latency: f64) -> Result<()> {
        if !(latency >= 0.0) {
            return Err(Error::contract("latency must be non-negative"));
        }
        let t_i = message.timestamp();
        if !t_i.is_finite() || t_i < 0.0 {
            return Err(Error::contract("message timestamp must be finite and >= 0"));
        }
        let mut records = self.records.write().expect("bus lock poisoned");
        let queue = records.entry(message.agent_id()).or_default();
        if let Some(last) = queue.last() {
            if t_i < last.message.timestamp() {
                return Err(Error::contract(format!(
                    "agent {} published t_i={t_i} after t_i={}",
                    message.agent_id(),
                    last.message.timestamp()
                )));
            }
        }
        queue.push(BusRecord {
            message: Arc::new(message),
            available_from: t_i + latency,
        });
        Ok(())
    }

    /// Latest eligible message of every agent other than `querier`.
    pub fn query(&self, t: f64, querier: AgentId) -> BTreeMap<AgentId, Arc<M>> {
        let records = self.records.read().expect("bus lock poisoned");
        records
            .iter()
            .filter(|(agent, _)| **agent != querier)
            .filter_map(|(agent, queue)| {
                queue
                    .iter()
                    .filter(|r| r.message.timestamp() <= t && r.available_from <= t)
                    .max_by(|a, b| a.message.timestamp().total_cmp(&b.message.timestamp()))
                    .map(|r| (*agent, Arc::clone(&r.message)))
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.records
            .read()
            .expect("bus lock poisoned")
            .values()
            .map(Vec::len)
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, PartialEq)]
    struct Msg(AgentId, f64);

    impl BusMessage for Msg {
        fn agent_id(&self) -> AgentId {
            self.0
        }
        fn timestamp(&self) -> f64 {
            self.1
        }
    }

    #[test]
    fn empty_bus_returns_nothing() {
        let bus: MessageBus<Msg> = MessageBus::new();
        assert!(bus.query(1.0, 1).is_empty());
    }

    #[test]
    fn latency_delays_availability() {
        let bus = MessageBus::new();
        bus.publish(Msg(2, 1.0), 0.1).unwrap();
        assert!(bus.query(1.05, 1).is_empty());
        assert_eq!(*bus.query(1.1, 1)[&2], Msg(2, 1.0));
        let bus = MessageBus::new();
        bus.publish(Msg(2, 1.0), 0.0).unwrap();
        assert_eq!(bus.query(1.0, 1).len(), 1);
    }

    #[test]
    fn latest_prior_semantics() {
        let bus = MessageBus::new();
        bus.publish(Msg(0, 0.0), 0.0).unwrap();
        bus.publish(Msg(0, 0.2), 0.0).unwrap();
        assert_eq!(bus.query(0.3, 1)[&0].1, 0.2);
        assert_eq!(bus.query(0.1, 1)[&0].1, 0.0);
    }

    #[test]
    fn querier_is_excluded_and_agents_are_independent() {
        let bus = MessageBus::new();
        bus.publish(Msg(0, 0.2), 0.0).unwrap();
        bus.publish(Msg(2, 0.2), 0.0).unwrap();
        bus.publish(Msg(1, 0.2), 0.0).unwrap();
        let got = bus.query(0.2, 1);
        assert_eq!(got.keys().copied().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn out_of_order_publish_rejected() {
        let bus = MessageBus::new();
        bus.publish(Msg(2, 0.4), 0.0).unwrap();
        assert!(bus.publish(Msg(2, 0.2), 0.0).is_err());
        bus.publish(Msg(2, 0.4), 0.0).unwrap();
        assert!(bus.publish(Msg(3, 0.0), -1.0).is_err());
    }

    #[test]
    fn concurrent_publishers() {
        let bus = Arc::new(MessageBus::new());
        std::thread::scope(|s| {
            for agent in [0u8, 2, 3, 4] {
                let bus = Arc::clone(&bus);
                s.spawn(move || {
                    for k in 0..50 {
                        bus.publish(Msg(agent, k as f64 * 0.2), 0.0).unwrap();
                    }
                });
            }
        });
        let got = bus.query(100.0, 1);
        assert_eq!(got.len(), 4);
        assert!(got.values().all(|m| (m.1 - 9.8).abs() < 1e-9));
    }
}
