use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::model::PlatformInstant;

pub type ContainerId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContainerState {
    Idle,
    Busy,
}

/// A sandboxed execution environment of one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Container {
    pub id: ContainerId,
    pub function_name: String,
    pub created_at: PlatformInstant,
    pub last_used_at: PlatformInstant,
    pub state: ContainerState,
    /// Invocations currently running inside.
    pub active: u32,
}

/// Containers of one function, keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Pool {
    containers: BTreeMap<ContainerId, Container>,
}

impl Pool {
    pub fn len(&self) -> usize {
        self.containers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.containers.is_empty()
    }

    pub fn idle_count(&self) -> usize {
        self.containers
            .values()
            .filter(|c| c.state == ContainerState::Idle)
            .count()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Container> {
        self.containers.values()
    }

    pub fn get_mut(&mut self, id: ContainerId) -> Option<&mut Container> {
        self.containers.get_mut(&id)
    }

    pub fn insert(&mut self, c: Container) {
        self.containers.insert(c.id, c);
    }

    pub fn remove(&mut self, id: ContainerId) -> Option<Container> {
        self.containers.remove(&id)
    }

    pub fn clear(&mut self) {
        self.containers.clear();
    }

    /// Most recently used idle container.
    pub fn mru_idle(&self) -> Option<ContainerId> {
        self.containers
            .values()
            .filter(|c| c.state == ContainerState::Idle)
            .max_by_key(|c| (c.last_used_at, c.id))
            .map(|c| c.id)
    }

    /// Most recently used busy container with a free slot.
    pub fn mru_with_slot(&self, slots: u32) -> Option<ContainerId> {
        self.containers
            .values()
            .filter(|c| c.state == ContainerState::Busy && c.active < slots)
            .max_by_key(|c| (c.last_used_at, c.id))
            .map(|c| c.id)
    }

    /// Removes `ceil(k / 2)` of the `k` idle containers, least recently
    /// used first. Busy containers are left alone.
    pub fn evict_half_idle(&mut self) -> Vec<ContainerId> {
        let mut idle: Vec<(PlatformInstant, ContainerId)> = self
            .containers
            .values()
            .filter(|c| c.state == ContainerState::Idle)
            .map(|c| (c.last_used_at, c.id))
            .collect();
        idle.sort_unstable();
        let evict = idle.len().div_ceil(2);
        let victims: Vec<ContainerId> = idle[..evict].iter().map(|&(_, id)| id).collect();
        for id in &victims {
            self.containers.remove(id);
        }
        victims
    }
}
