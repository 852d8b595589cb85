//! User-server association patterns.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::binomial::choose;
use crate::error::{Error, Result};
use crate::model::SystemParams;
use crate::subset::{subsets_of_size, UserSet, MAX_USERS};

/// Largest association count `enumerate_topologies` will walk.
pub const ENUMERATION_LIMIT: f64 = 1e7;

/// One server set `Z_k` per user, plus the per-server view derived from it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Topology {
    servers: usize,
    server_sets: Vec<Vec<usize>>,
    users_of: Vec<UserSet>,
}

#[derive(Serialize, Deserialize)]
struct TopologyJson {
    server_sets: Vec<Vec<usize>>,
}

impl Topology {
    /// Builds a topology over `servers` servers. Every set must be nonempty,
    /// duplicate-free, in range, and all sets must have the same size.
    pub fn new(servers: usize, server_sets: Vec<Vec<usize>>) -> Result<Self> {
        if server_sets.is_empty() || server_sets.len() > MAX_USERS {
            return Err(Error::InvalidSpec(format!(
                "a topology needs between 1 and {MAX_USERS} users, got {}",
                server_sets.len()
            )));
        }
        let rho = server_sets[0].len();
        let mut users_of = vec![UserSet::EMPTY; servers];
        let mut sorted_sets = Vec::with_capacity(server_sets.len());
        for (k, set) in server_sets.into_iter().enumerate() {
            let mut set = set;
            set.sort_unstable();
            set.dedup();
            if set.len() != rho || set.is_empty() {
                return Err(Error::InvalidSpec(format!(
                    "user {k} must connect to {rho} distinct servers"
                )));
            }
            if let Some(&p) = set.iter().find(|&&p| p >= servers) {
                return Err(Error::InvalidSpec(format!(
                    "user {k} names server {p}, but P = {servers}"
                )));
            }
            for &p in &set {
                users_of[p] = users_of[p].with(k);
            }
            sorted_sets.push(set);
        }
        Ok(Topology {
            servers,
            server_sets: sorted_sets,
            users_of,
        })
    }

    /// Errors unless the shape matches `(K, P, rho)` of `params`.
    pub fn check(&self, params: &SystemParams) -> Result<()> {
        if self.users() != params.users()
            || self.servers != params.servers()
            || self.rho() != params.rho()
        {
            return Err(Error::InvalidSpec(format!(
                "topology has K = {}, P = {}, rho = {}; parameters have K = {}, P = {}, rho = {}",
                self.users(),
                self.servers,
                self.rho(),
                params.users(),
                params.servers(),
                params.rho()
            )));
        }
        Ok(())
    }

    pub fn users(&self) -> usize {
        self.server_sets.len()
    }

    pub fn servers(&self) -> usize {
        self.servers
    }

    pub fn rho(&self) -> usize {
        self.server_sets[0].len()
    }

    pub fn server_sets(&self) -> &[Vec<usize>] {
        &self.server_sets
    }

    /// `Z_k`, sorted.
    pub fn server_set(&self, user: usize) -> &[usize] {
        &self.server_sets[user]
    }

    /// `K_p`, the users connected to server `p`.
    pub fn users_of(&self, server: usize) -> UserSet {
        self.users_of[server]
    }

    pub fn is_connected(&self, server: usize, user: usize) -> bool {
        self.users_of[server].contains(user)
    }

    /// Load vector `q`.
    pub fn loads(&self) -> Vec<usize> {
        self.users_of.iter().map(|s| s.len()).collect()
    }

    /// `g_i` = number of servers with exactly `i` users, for `i = 0..=K`.
    pub fn type_vector(&self) -> Vec<usize> {
        let mut g = vec![0; self.users() + 1];
        for s in &self.users_of {
            g[s.len()] += 1;
        }
        g
    }

    /// P x K 0/1 matrix with `a[p][k] = 1` iff `p` is in `Z_k`.
    pub fn incidence(&self) -> Vec<Vec<u8>> {
        self.users_of
            .iter()
            .map(|s| (0..self.users()).map(|k| s.contains(k) as u8).collect())
            .collect()
    }

    /// Relabels server `p` as `perm[p]`.
    pub fn permute_servers(&self, perm: &[usize]) -> Result<Topology> {
        let mut seen = vec![false; self.servers];
        if perm.len() != self.servers
            || perm
                .iter()
                .any(|&p| p >= self.servers || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::InvalidSpec(
                "not a permutation of the servers".into(),
            ));
        }
        let sets = self
            .server_sets
            .iter()
            .map(|set| set.iter().map(|&p| perm[p]).collect())
            .collect();
        Topology::new(self.servers, sets)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TopologyJson {
            server_sets: self.server_sets.clone(),
        })
        .expect("plain integers serialize")
    }

    /// Parses `{"server_sets": [[...], ...]}` with 0-based server indices.
    pub fn from_json(s: &str, servers: usize) -> Result<Topology> {
        let raw: TopologyJson = serde_json::from_str(s)?;
        Topology::new(servers, raw.server_sets)
    }
}

/// Draws each `Z_k` uniformly from the rho-subsets of `[P]`, user by user.
pub fn sample_topology<R: Rng + ?Sized>(params: &SystemParams, rng: &mut R) -> Topology {
    let (p, rho) = (params.servers(), params.rho());
    let sets = (0..params.users())
        .map(|_| sample(rng, p, rho).into_vec())
        .collect();
    Topology::new(p, sets).expect("sampled sets are valid")
}

/// Every association, with user 0's set varying fastest and each user's set
/// running through the rho-subsets of `[P]` in colex order.
pub fn enumerate_topologies(params: &SystemParams) -> Result<impl Iterator<Item = Topology>> {
    let (k, p, rho) = (params.users(), params.servers(), params.rho());
    let per_user = choose(p as u64, rho as u64) as f64;
    let count = per_user.powi(k as i32);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let choices: Vec<Vec<usize>> = subsets_of_size(p, rho)
        .map(|s| s.iter().collect())
        .collect();
    let mut digits = vec![0usize; k];
    let mut done = false;
    Ok(std::iter::from_fn(move || {
        if done {
            return None;
        }
        let sets = digits.iter().map(|&d| choices[d].clone()).collect();
        let topo = Topology::new(p, sets).expect("enumerated sets are valid");
        done = true;
        for d in digits.iter_mut() {
            *d += 1;
            if *d < choices.len() {
                done = false;
                break;
            }
            *d = 0;
        }
        Some(topo)
    }))
}

fn concentrated(users: usize, servers: usize, rho: usize) -> Topology {
    Topology::new(servers, vec![(0..rho).collect(); users]).expect("valid shape")
}

fn cyclic(users: usize, servers: usize, rho: usize) -> Topology {
    let sets = (0..users)
        .map(|k| (0..rho).map(|i| (k * rho + i) % servers).collect())
        .collect();
    Topology::new(servers, sets).expect("valid shape")
}

/// All users on servers `0..rho`.
pub fn fixed_topology_best_successive(params: &SystemParams) -> Topology {
    concentrated(params.users(), params.servers(), params.rho())
}

/// Loads as equal as possible: user `k` takes `k*rho .. k*rho + rho` modulo P.
pub fn fixed_topology_worst_successive(params: &SystemParams) -> Topology {
    cyclic(params.users(), params.servers(), params.rho())
}

/// The balanced topology, so the largest load is `ceil(K rho / P)`.
pub fn fixed_topology_best_parallel(params: &SystemParams) -> Topology {
    cyclic(params.users(), params.servers(), params.rho())
}

/// Every user on the same servers.
pub fn fixed_topology_worst_parallel(params: &SystemParams) -> Topology {
    concentrated(params.users(), params.servers(), params.rho())
}
