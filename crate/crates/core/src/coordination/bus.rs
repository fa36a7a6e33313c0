use serde::{Deserialize, Serialize};

/// Bytes accounted per scalar on the wire.
pub const BYTES_PER_SCALAR: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    CandidateThreshold,
    UtilityScalar,
    Decision,
}

/// One scalar exchanged between two stations. Only thresholds, utilities
/// and decisions exist as message kinds, so channels or precoders cannot be
/// sent by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub t: usize,
    pub tau: usize,
    pub sender: usize,
    pub receiver: usize,
    pub kind: MessageKind,
    pub scalars: usize,
    pub value: f64,
}

/// Append-only ledger of inter-station messages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MessageBus {
    ledger: Vec<BusMessage>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BusCounts {
    pub messages: usize,
    pub thresholds: usize,
    pub utilities: usize,
    pub decisions: usize,
    pub scalars: usize,
    pub bytes: usize,
}

impl MessageBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, t: usize, tau: usize, sender: usize, receiver: usize, kind: MessageKind, value: f64) {
        self.ledger.push(BusMessage { t, tau, sender, receiver, kind, scalars: 1, value });
    }

    pub fn extend(&mut self, other: MessageBus) {
        self.ledger.extend(other.ledger);
    }

    pub fn ledger(&self) -> &[BusMessage] {
        &self.ledger
    }

    pub fn counts(&self) -> BusCounts {
        Self::count(self.ledger.iter())
    }

    /// Counts restricted to one AO iteration.
    pub fn counts_for(&self, t: usize) -> BusCounts {
        Self::count(self.ledger.iter().filter(|m| m.t == t))
    }

    fn count<'a>(messages: impl Iterator<Item = &'a BusMessage>) -> BusCounts {
        let mut c = BusCounts::default();
        for m in messages {
            c.messages += 1;
            c.scalars += m.scalars;
            match m.kind {
                MessageKind::CandidateThreshold => c.thresholds += 1,
                MessageKind::UtilityScalar => c.utilities += 1,
                MessageKind::Decision => c.decisions += 1,
            }
        }
        c.bytes = c.scalars * BYTES_PER_SCALAR;
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_by_kind() {
        let mut bus = MessageBus::new();
        bus.send(0, 1, 0, 1, MessageKind::CandidateThreshold, 1e-9);
        bus.send(0, 1, 1, 0, MessageKind::UtilityScalar, 3.0);
        bus.send(1, 1, 0, 1, MessageKind::Decision, 1.0);
        let c = bus.counts();
        assert_eq!((c.messages, c.thresholds, c.utilities, c.decisions), (3, 1, 1, 1));
        assert_eq!(c.bytes, 24);
        assert_eq!(bus.counts_for(1).messages, 1);
    }
}
