//! Pure-ALOHA collision law: two attempts destroy each other when their
//! airtimes overlap at the same receiver, channel and spreading factor. No
//! capture effect.

use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChannelKey {
    pub receiver: u32,
    pub channel: u16,
    pub spreading_factor: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Attempt {
    pub start_s: f64,
    pub airtime_s: f64,
    pub key: ChannelKey,
}

impl Attempt {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.airtime_s
    }
}

/// Outcome of every attempt in `attempts` (true = received).
pub fn resolve_collisions(attempts: &[Attempt]) -> Vec<bool> {
    let mut ok = vec![true; attempts.len()];
    let mut order: Vec<usize> = (0..attempts.len()).collect();
    order.sort_by(|&a, &b| {
        attempts[a]
            .key
            .cmp(&attempts[b].key)
            .then(attempts[a].start_s.total_cmp(&attempts[b].start_s))
    });
    // Sweep each channel in start order, tracking the attempt reaching
    // furthest. Any earlier attempt still on air overlaps the current one,
    // and when two or more are on air they already overlap each other.
    let mut reach: Option<(ChannelKey, f64, usize)> = None;
    for i in order {
        let a = &attempts[i];
        match reach {
            Some((key, end, j)) if key == a.key && end > a.start_s => {
                ok[i] = false;
                ok[j] = false;
                if a.end_s() > end {
                    reach = Some((key, a.end_s(), i));
                }
            }
            Some((key, end, _)) if key == a.key && end >= a.end_s() => {}
            _ => reach = Some((a.key, a.end_s(), i)),
        }
    }
    ok
}

/// Incremental form of [`resolve_collisions`] for an event loop that sees
/// attempts start in time order.
#[derive(Debug, Default)]
pub struct CollisionMonitor {
    on_air: BTreeMap<ChannelKey, Vec<(u64, f64)>>,
    collided: BTreeSet<u64>,
}

impl CollisionMonitor {
    pub fn start(&mut self, id: u64, attempt: &Attempt) {
        let active = self.on_air.entry(attempt.key).or_default();
        active.retain(|&(_, end)| end > attempt.start_s);
        if !active.is_empty() {
            self.collided.insert(id);
            self.collided.extend(active.iter().map(|&(other, _)| other));
        }
        active.push((id, attempt.end_s()));
    }

    /// Whether attempt `id` got through. Call once, at its end.
    pub fn finish(&mut self, id: u64) -> bool {
        !self.collided.remove(&id)
    }
}
