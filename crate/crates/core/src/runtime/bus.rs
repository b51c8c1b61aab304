use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::mpc::Trajectory;
use crate::planner::PassageTimeMap;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    TimeMap(PassageTimeMap),
    Trajectory(Trajectory),
}

impl Payload {
    pub fn kind(&self) -> PayloadKind {
        match self {
            Payload::TimeMap(_) => PayloadKind::TimeMap,
            Payload::Trajectory(_) => PayloadKind::Trajectory,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    TimeMap,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusMessage {
    pub sender: usize,
    pub version: u64,
    pub tick: u64,
    pub payload: Payload,
}

/// Latest message of each kind per sender. Older versions never replace
/// newer ones.
#[derive(Debug, Clone, Default)]
pub struct BusView {
    pub maps: BTreeMap<usize, PassageTimeMap>,
    pub trajectories: BTreeMap<usize, Trajectory>,
}

impl BusView {
    pub fn apply(&mut self, msg: &BusMessage) {
        match &msg.payload {
            Payload::TimeMap(m) => {
                if self.maps.get(&msg.sender).is_none_or(|old| old.version < msg.version) {
                    self.maps.insert(msg.sender, m.clone());
                }
            }
            Payload::Trajectory(t) => {
                if self
                    .trajectories
                    .get(&msg.sender)
                    .is_none_or(|old| old.version < msg.version)
                {
                    self.trajectories.insert(msg.sender, t.clone());
                }
            }
        }
    }

    pub fn map_version(&self, agent: usize) -> u64 {
        self.maps.get(&agent).map_or(0, |m| m.version)
    }

    pub fn maps_vec(&self) -> Vec<PassageTimeMap> {
        self.maps.values().cloned().collect()
    }

    pub fn other_trajectories(&self, agent: usize) -> Vec<Trajectory> {
        self.trajectories
            .iter()
            .filter(|(&k, _)| k != agent)
            .map(|(_, t)| t.clone())
            .collect()
    }
}
