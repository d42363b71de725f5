//! In-process pub/sub bus. Topics are plain strings; delivery is FIFO per
//! topic and happens within the tick of publication.

use std::collections::{BTreeMap, VecDeque};

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct BusMessage {
    pub topic: String,
    pub payload: Value,
    pub tick: u64,
}

/// Topic queues. BTreeMap keys give a stable drain order across runs.
#[derive(Debug, Default)]
pub struct Bus {
    queues: BTreeMap<String, VecDeque<BusMessage>>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn publish(&mut self, topic: impl Into<String>, payload: Value, tick: u64) {
        let topic = topic.into();
        let message = BusMessage {
            topic: topic.clone(),
            payload,
            tick,
        };
        self.queues.entry(topic).or_default().push_back(message);
    }

    /// Removes and returns the oldest message on `topic`.
    pub fn pop(&mut self, topic: &str) -> Option<BusMessage> {
        self.queues.get_mut(topic)?.pop_front()
    }

    /// Drains every queue whose topic starts with `prefix`, in topic order.
    pub fn drain_prefix(&mut self, prefix: &str) -> Vec<BusMessage> {
        let mut out = Vec::new();
        for (topic, queue) in self.queues.iter_mut() {
            if topic.starts_with(prefix) {
                out.extend(queue.drain(..));
            }
        }
        out
    }

    pub fn len(&self, topic: &str) -> usize {
        self.queues.get(topic).map_or(0, VecDeque::len)
    }

    pub fn is_empty(&self) -> bool {
        self.queues.values().all(VecDeque::is_empty)
    }
}
