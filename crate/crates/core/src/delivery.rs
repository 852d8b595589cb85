//! Delivery phase: multicast groups, server selection, XOR messages and
//! decode verification.
//!
//! Planning is split in two steps. A [`Schedule`] records who sends what to
//! whom and is all that latency needs; [`materialize`] turns it into a
//! [`TransmissionPlan`] with real payloads for end-to-end checks.

use std::collections::HashMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::binomial::choose;
use crate::error::{Error, Result};
use crate::mds::{decode_segment, encode_share};
use crate::model::{DemandVector, FileLibrary, SegmentId};
use crate::placement::{segment_library, MinStoragePlacement, Placement};
use crate::subset::{subsets_of_size, UserSet};
use crate::topology::Topology;
use crate::Rational;

/// Exact cover search is used up to this many group members...
pub const EXACT_MAX_MEMBERS: usize = 6;
/// ...and this many candidate servers.
pub const EXACT_MAX_CANDIDATES: usize = 20;

/// A (t+1)-subset of users served jointly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MulticastGroup {
    pub members: UserSet,
}

/// All multicast groups of size `t + 1` in colex order.
pub fn multicast_groups(users: usize, t: usize) -> impl Iterator<Item = MulticastGroup> {
    subsets_of_size(users, t + 1).map(|members| MulticastGroup { members })
}

/// One message without its payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transmission {
    pub server: usize,
    pub group: UserSet,
    /// Users whose subsegments are XORed together; always `group ∩ K_p`.
    pub served: UserSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverMode {
    Exact,
    Greedy,
}

/// Which cover search to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverStrategy {
    /// Exact below the size guard, greedy above it.
    Auto,
    Exact,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub servers: Vec<usize>,
    pub mode: CoverMode,
}

/// Per-server ordered transmissions plus the size of one message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    pub users: usize,
    pub code_dim: usize,
    /// Caching parameter of the coded scheme; `None` for minimum-storage unicast.
    pub t: Option<usize>,
    /// Message length as a fraction of a file.
    pub message_fraction: Rational,
    pub per_server: Vec<Vec<Transmission>>,
    /// Number of groups whose cover fell back to greedy search.
    pub greedy_covers: usize,
}

impl Schedule {
    fn empty(
        topo: &Topology,
        t: Option<usize>,
        code_dim: usize,
        message_fraction: Rational,
    ) -> Self {
        Schedule {
            users: topo.users(),
            code_dim,
            t,
            message_fraction,
            per_server: vec![Vec::new(); topo.servers()],
            greedy_covers: 0,
        }
    }

    fn push(&mut self, tx: Transmission) {
        self.per_server[tx.server].push(tx);
    }

    pub fn message_counts(&self) -> Vec<usize> {
        self.per_server.iter().map(Vec::len).collect()
    }

    pub fn total_messages(&self) -> usize {
        self.per_server.iter().map(Vec::len).sum()
    }

    pub fn latency(&self) -> LatencyReport {
        LatencyReport::from_counts(self.message_counts(), self.message_fraction)
    }
}

/// Per-server normalized rates and both latency metrics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LatencyReport {
    #[serde(serialize_with = "ser_rationals")]
    pub rates: Vec<Rational>,
    #[serde(serialize_with = "ser_rational")]
    pub t_sd: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub t_pd: Rational,
    pub message_counts: Vec<usize>,
}

fn ser_rational<S: serde::Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_rationals<S: serde::Serializer>(
    r: &[Rational],
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(r.iter().map(Rational::to_string))
}

impl LatencyReport {
    pub fn from_counts(message_counts: Vec<usize>, fraction: Rational) -> Self {
        let rates: Vec<Rational> = message_counts
            .iter()
            .map(|&c| Rational::from_integer(c as i128) * fraction)
            .collect();
        let t_sd = rates.iter().copied().sum();
        let t_pd = rates.iter().copied().max().unwrap_or_default();
        LatencyReport {
            rates,
            t_sd,
            t_pd,
            message_counts,
        }
    }
}

fn coded_fraction(users: usize, t: usize, code_dim: usize) -> Rational {
    let segs = choose(users as u64, t as u64) as i128;
    Rational::new(1, code_dim as i128 * segs)
}

fn check_t(topo: &Topology, t: usize) -> Result<()> {
    if t > topo.users() {
        return Err(Error::BadRange(format!(
            "t = {t} exceeds K = {}",
            topo.users()
        )));
    }
    Ok(())
}

/// Every server sends one message to every group it reaches.
pub fn schedule_successive_z0(topo: &Topology, t: usize) -> Result<Schedule> {
    check_t(topo, t)?;
    let rho = topo.rho();
    let mut sched = Schedule::empty(topo, Some(t), rho, coded_fraction(topo.users(), t, rho));
    if t == topo.users() {
        return Ok(sched);
    }
    for h in multicast_groups(topo.users(), t) {
        for p in 0..topo.servers() {
            let served = h.members.intersection(topo.users_of(p));
            if !served.is_empty() {
                sched.push(Transmission {
                    server: p,
                    group: h.members,
                    served,
                });
            }
        }
    }
    Ok(sched)
}

/// Smallest set of servers giving every member of `group` at least `need`
/// selected servers it is connected to. Ties go to the lexicographically
/// least server list.
pub fn min_cover(topo: &Topology, group: UserSet, need: usize) -> Result<Cover> {
    min_cover_with(topo, group, need, CoverStrategy::Auto)
}

pub fn min_cover_with(
    topo: &Topology,
    group: UserSet,
    need: usize,
    strategy: CoverStrategy,
) -> Result<Cover> {
    let members: Vec<usize> = group.iter().collect();
    let candidates: Vec<usize> = (0..topo.servers())
        .filter(|&p| !group.intersection(topo.users_of(p)).is_empty())
        .collect();
    for &k in &members {
        if topo.server_set(k).len() < need {
            return Err(Error::Uncoverable {
                group: members.clone(),
                need,
            });
        }
    }
    if need == 0 || members.is_empty() {
        return Ok(Cover {
            servers: Vec::new(),
            mode: CoverMode::Exact,
        });
    }
    // bitmask of members reached by each candidate
    let reach: Vec<u64> = candidates
        .iter()
        .map(|&p| {
            members
                .iter()
                .enumerate()
                .filter(|&(_, &k)| topo.is_connected(p, k))
                .fold(0u64, |m, (i, _)| m | 1 << i)
        })
        .collect();
    let exact = match strategy {
        CoverStrategy::Exact => true,
        CoverStrategy::Greedy => false,
        CoverStrategy::Auto => {
            members.len() <= EXACT_MAX_MEMBERS && candidates.len() <= EXACT_MAX_CANDIDATES
        }
    };
    let chosen = if exact {
        exact_cover(&reach, members.len(), need)
    } else {
        greedy_cover(&reach, members.len(), need)
    };
    let chosen = chosen.ok_or(Error::Uncoverable {
        group: members,
        need,
    })?;
    Ok(Cover {
        servers: chosen.into_iter().map(|i| candidates[i]).collect(),
        mode: if exact {
            CoverMode::Exact
        } else {
            CoverMode::Greedy
        },
    })
}

fn greedy_cover(reach: &[u64], members: usize, need: usize) -> Option<Vec<usize>> {
    let mut deficit = vec![need; members];
    let mut used = vec![false; reach.len()];
    let mut chosen = Vec::new();
    while deficit.iter().any(|&d| d > 0) {
        let needy: u64 = (0..members)
            .filter(|&i| deficit[i] > 0)
            .fold(0, |m, i| m | 1 << i);
        let best = (0..reach.len())
            .filter(|&c| !used[c] && reach[c] & needy != 0)
            .max_by_key(|&c| ((reach[c] & needy).count_ones(), std::cmp::Reverse(c)))?;
        used[best] = true;
        chosen.push(best);
        for (i, d) in deficit.iter_mut().enumerate() {
            if reach[best] >> i & 1 == 1 {
                *d = d.saturating_sub(1);
            }
        }
    }
    chosen.sort_unstable();
    Some(chosen)
}

struct ExactSearch<'a> {
    reach: &'a [u64],
    members: usize,
    /// `avail[c][i]`: candidates at index >= c reaching member i
    avail: Vec<Vec<usize>>,
    best: Option<Vec<usize>>,
    current: Vec<usize>,
}

impl ExactSearch<'_> {
    fn lower_bound(&self, deficit: &[usize], from: usize) -> Option<usize> {
        let mut bound = 0;
        let mut total = 0;
        for i in 0..self.members {
            if deficit[i] > self.avail[from][i] {
                return None;
            }
            bound = bound.max(deficit[i]);
            total += deficit[i];
        }
        let widest = self.reach[from..]
            .iter()
            .map(|r| r.count_ones() as usize)
            .max()
            .unwrap_or(0);
        if widest > 0 {
            bound = bound.max(total.div_ceil(widest));
        }
        Some(bound)
    }

    fn search(&mut self, from: usize, deficit: &mut Vec<usize>) {
        if deficit.iter().all(|&d| d == 0) {
            if self
                .best
                .as_ref()
                .is_none_or(|b| self.current.len() < b.len())
            {
                self.best = Some(self.current.clone());
            }
            return;
        }
        if from == self.reach.len() {
            return;
        }
        let Some(lb) = self.lower_bound(deficit, from) else {
            return;
        };
        if let Some(b) = &self.best {
            if self.current.len() + lb >= b.len() {
                return;
            }
        }
        let r = self.reach[from];
        let helps = (0..self.members).any(|i| r >> i & 1 == 1 && deficit[i] > 0);
        if helps {
            let before = deficit.clone();
            for (i, d) in deficit.iter_mut().enumerate() {
                if r >> i & 1 == 1 {
                    *d = d.saturating_sub(1);
                }
            }
            self.current.push(from);
            self.search(from + 1, deficit);
            self.current.pop();
            *deficit = before;
        }
        self.search(from + 1, deficit);
    }
}

fn exact_cover(reach: &[u64], members: usize, need: usize) -> Option<Vec<usize>> {
    let mut avail = vec![vec![0; members]; reach.len() + 1];
    for c in (0..reach.len()).rev() {
        for i in 0..members {
            avail[c][i] = avail[c + 1][i] + (reach[c] >> i & 1) as usize;
        }
    }
    let mut s = ExactSearch {
        reach,
        members,
        avail,
        best: None,
        current: Vec::new(),
    };
    s.search(0, &mut vec![need; members]);
    s.best
}

/// The messages the servers of `cover` send to `group`.
pub fn messages_for_cover(topo: &Topology, group: UserSet, cover: &[usize]) -> Vec<Transmission> {
    cover
        .iter()
        .map(|&p| Transmission {
            server: p,
            group,
            served: group.intersection(topo.users_of(p)),
        })
        .collect()
}

/// Only the servers of a minimum cover transmit, each to `H ∩ K_p`.
pub fn schedule_successive_redundant(
    topo: &Topology,
    t: usize,
    code_dim: usize,
) -> Result<Schedule> {
    check_t(topo, t)?;
    let mut sched = Schedule::empty(
        topo,
        Some(t),
        code_dim,
        coded_fraction(topo.users(), t, code_dim),
    );
    if t == topo.users() {
        return Ok(sched);
    }
    for h in multicast_groups(topo.users(), t) {
        let cover = min_cover(topo, h.members, code_dim)?;
        if cover.mode == CoverMode::Greedy {
            sched.greedy_covers += 1;
        }
        for tx in messages_for_cover(topo, h.members, &cover.servers) {
            sched.push(tx);
        }
    }
    Ok(sched)
}

/// Greedy load-balanced server selection, group by group in colex order.
pub fn schedule_parallel(topo: &Topology, t: usize, code_dim: usize) -> Result<Schedule> {
    check_t(topo, t)?;
    let mut sched = Schedule::empty(
        topo,
        Some(t),
        code_dim,
        coded_fraction(topo.users(), t, code_dim),
    );
    if t == topo.users() {
        return Ok(sched);
    }
    let servers = topo.servers();
    let mut counts = vec![0usize; servers];
    for h in multicast_groups(topo.users(), t) {
        let mut have = vec![0usize; topo.users()];
        let mut used = vec![false; servers];
        loop {
            let needy: UserSet = h.members.iter().filter(|&k| have[k] < code_dim).collect();
            if needy.is_empty() {
                break;
            }
            let useful: Vec<usize> = (0..servers)
                .filter(|&p| !used[p] && !needy.intersection(topo.users_of(p)).is_empty())
                .collect();
            if useful.is_empty() {
                return Err(Error::Uncoverable {
                    group: h.members.into(),
                    need: code_dim,
                });
            }
            // a server strictly above every other server's count sits out,
            // unless it is the only one left that helps
            let top = (0..servers)
                .max_by_key(|&p| (counts[p], std::cmp::Reverse(p)))
                .expect("P >= 1");
            let unique_top = (0..servers).all(|p| p == top || counts[p] < counts[top]);
            let eligible: Vec<usize> = if unique_top && useful.len() > 1 {
                useful.iter().copied().filter(|&p| p != top).collect()
            } else {
                useful
            };
            let pick = eligible
                .into_iter()
                .max_by_key(|&p| {
                    (
                        needy.intersection(topo.users_of(p)).len(),
                        std::cmp::Reverse(p),
                    )
                })
                .expect("nonempty");
            let served = h.members.intersection(topo.users_of(pick));
            for k in served.iter() {
                have[k] += 1;
            }
            used[pick] = true;
            counts[pick] += 1;
            sched.push(Transmission {
                server: pick,
                group: h.members,
                served,
            });
        }
    }
    Ok(sched)
}

/// Every server unicasts its share of the uncached remainder to each
/// connected user; `mu` is the cached fraction `M_U / N`.
pub fn schedule_min_storage(topo: &Topology, mu: Rational) -> Result<Schedule> {
    if mu < Rational::from_integer(0) || mu > Rational::from_integer(1) {
        return Err(Error::BadRange(format!(
            "cached fraction {mu} outside [0, 1]"
        )));
    }
    let rho = topo.rho();
    let fraction = (Rational::from_integer(1) - mu) / Rational::from_integer(rho as i128);
    let mut sched = Schedule::empty(topo, None, rho, fraction);
    if mu == Rational::from_integer(1) {
        return Ok(sched);
    }
    for p in 0..topo.servers() {
        for k in topo.users_of(p).iter() {
            let only = UserSet::singleton(k);
            sched.push(Transmission {
                server: p,
                group: only,
                served: only,
            });
        }
    }
    Ok(sched)
}

/// A transmission together with its bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub server: usize,
    pub group: MulticastGroup,
    pub served: UserSet,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionPlan {
    pub schedule: Schedule,
    /// `[server]` -> messages in sending order.
    pub messages: Vec<Vec<Message>>,
    pub topology: Topology,
    pub demands: DemandVector,
}

fn xor_into(acc: &mut [u8], src: &[u8]) {
    for (a, b) in acc.iter_mut().zip(src) {
        *a ^= b;
    }
}

fn check_demands(topo: &Topology, demands: &DemandVector) -> Result<()> {
    if demands.len() != topo.users() {
        return Err(Error::BadRange(format!(
            "{} demands for {} users",
            demands.len(),
            topo.users()
        )));
    }
    Ok(())
}

/// Fills in payloads for a coded schedule.
pub fn materialize(
    schedule: Schedule,
    topo: &Topology,
    demands: &DemandVector,
    placement: &Placement,
) -> Result<TransmissionPlan> {
    check_demands(topo, demands)?;
    if schedule.t != Some(placement.t()) || schedule.code_dim != placement.code_dim() {
        return Err(Error::InvalidSpec(
            "schedule and placement disagree on t or the code".into(),
        ));
    }
    let sub = placement.subsegment_len();
    let mut messages = vec![Vec::new(); schedule.per_server.len()];
    for (p, list) in schedule.per_server.iter().enumerate() {
        for tx in list {
            let mut payload = vec![0u8; sub];
            for k in tx.served.iter() {
                let id = SegmentId::new(demands.get(k), tx.group.without(k));
                let share = placement.servers[p]
                    .get(&id)
                    .ok_or_else(|| Error::InvalidSpec(format!("server {p} lacks {id}")))?;
                xor_into(&mut payload, share);
            }
            messages[p].push(Message {
                server: p,
                group: MulticastGroup { members: tx.group },
                served: tx.served,
                payload,
            });
        }
    }
    Ok(TransmissionPlan {
        schedule,
        messages,
        topology: topo.clone(),
        demands: demands.clone(),
    })
}

pub fn plan_successive_z0(
    topo: &Topology,
    demands: &DemandVector,
    placement: &Placement,
) -> Result<TransmissionPlan> {
    if placement.code_dim() != topo.rho() {
        return Err(Error::InvalidSpec("this planner needs z = 0".into()));
    }
    materialize(
        schedule_successive_z0(topo, placement.t())?,
        topo,
        demands,
        placement,
    )
}

pub fn plan_successive_redundant(
    topo: &Topology,
    demands: &DemandVector,
    placement: &Placement,
) -> Result<TransmissionPlan> {
    let sched = schedule_successive_redundant(topo, placement.t(), placement.code_dim())?;
    materialize(sched, topo, demands, placement)
}

pub fn plan_parallel(
    topo: &Topology,
    demands: &DemandVector,
    placement: &Placement,
) -> Result<TransmissionPlan> {
    let sched = schedule_parallel(topo, placement.t(), placement.code_dim())?;
    materialize(sched, topo, demands, placement)
}

pub fn plan_min_storage(
    topo: &Topology,
    demands: &DemandVector,
    placement: &MinStoragePlacement,
    mu: Rational,
) -> Result<TransmissionPlan> {
    check_demands(topo, demands)?;
    let schedule = schedule_min_storage(topo, mu)?;
    let messages = schedule
        .per_server
        .iter()
        .enumerate()
        .map(|(p, list)| {
            list.iter()
                .map(|tx| Message {
                    server: p,
                    group: MulticastGroup { members: tx.group },
                    served: tx.served,
                    payload: placement
                        .shard(p, demands.get(tx.group.iter().next().expect("unicast")))
                        .to_vec(),
                })
                .collect()
        })
        .collect();
    Ok(TransmissionPlan {
        schedule,
        messages,
        topology: topo.clone(),
        demands: demands.clone(),
    })
}

#[derive(Debug, Clone, Serialize)]
struct ExportedMessage {
    server: usize,
    group: Vec<usize>,
    served: Vec<usize>,
    payload_hash: String,
}

#[derive(Debug, Clone, Serialize)]
struct ExportedPlan<'a> {
    message_fraction: String,
    topology: &'a [Vec<usize>],
    demands: &'a [usize],
    messages: Vec<ExportedMessage>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

impl TransmissionPlan {
    pub fn latency(&self) -> LatencyReport {
        LatencyReport::from_counts(
            self.messages.iter().map(Vec::len).collect(),
            self.schedule.message_fraction,
        )
    }

    pub fn total_messages(&self) -> usize {
        self.messages.iter().map(Vec::len).sum()
    }

    /// JSON listing of every message with a SHA-256 of its payload.
    pub fn export_json(&self) -> String {
        let messages = self
            .messages
            .iter()
            .flatten()
            .map(|m| ExportedMessage {
                server: m.server,
                group: m.group.members.into(),
                served: m.served.into(),
                payload_hash: sha256_hex(&m.payload),
            })
            .collect();
        let doc = ExportedPlan {
            message_fraction: self.schedule.message_fraction.to_string(),
            topology: self.topology.server_sets(),
            demands: self.demands.as_slice(),
            messages,
        };
        serde_json::to_string_pretty(&doc).expect("plain data serializes")
    }

    /// Removes message `index` of `server`; returns it if it existed.
    pub fn drop_message(&mut self, server: usize, index: usize) -> Option<Message> {
        let list = self.messages.get_mut(server)?;
        (index < list.len()).then(|| list.remove(index))
    }

    /// Flips every bit of the first payload byte of message `index` of `server`.
    pub fn corrupt_message(&mut self, server: usize, index: usize) -> Option<&Message> {
        let msg = self.messages.get_mut(server)?.get_mut(index)?;
        if let Some(b) = msg.payload.first_mut() {
            *b ^= 0xff;
        }
        Some(msg)
    }

    /// Location of the first message of the lowest-index server that sends any.
    pub fn first_message(&self) -> Option<(usize, usize)> {
        self.messages
            .iter()
            .position(|l| !l.is_empty())
            .map(|p| (p, 0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserVerdict {
    pub user: usize,
    pub file: usize,
    pub passed: bool,
    /// Segments recovered from messages.
    pub decoded_segments: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    #[serde(skip)]
    pub error: Option<Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub verdicts: Vec<UserVerdict>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn failed_users(&self) -> Vec<usize> {
        self.verdicts
            .iter()
            .filter(|v| !v.passed)
            .map(|v| v.user)
            .collect()
    }
}

fn verdict(user: usize, file: usize, decoded: usize, outcome: Result<()>) -> UserVerdict {
    UserVerdict {
        user,
        file,
        passed: outcome.is_ok(),
        decoded_segments: decoded,
        failure: outcome.as_ref().err().map(ToString::to_string),
        error: outcome.err(),
    }
}

/// Runs every user's decoder on a coded plan and compares the result with
/// the library byte for byte.
pub fn execute_and_verify(
    plan: &TransmissionPlan,
    placement: &Placement,
    library: &FileLibrary,
) -> Result<VerifyReport> {
    let users = placement.users();
    let t = placement.t();
    let g = &placement.generator;
    let truth = segment_library(library, users, t)?;
    let mut by_group: HashMap<UserSet, Vec<&Message>> = HashMap::new();
    for m in plan.messages.iter().flatten() {
        by_group.entry(m.group.members).or_default().push(m);
    }
    let mut verdicts = Vec::with_capacity(users);
    for k in 0..users {
        let file = plan.demands.get(k);
        let cache = &placement.caches[k];
        let mut decoded = 0;
        let mut decode_user = || -> Result<()> {
            let mut assembled = Vec::with_capacity(library.padded_len());
            for &a in truth.subsets() {
                let id = SegmentId::new(file, a);
                if a.contains(k) {
                    let seg = cache
                        .get(&id)
                        .ok_or_else(|| mismatch(k, id, "cached segment missing"))?;
                    assembled.extend_from_slice(seg);
                    continue;
                }
                let h = a.with(k);
                let mut shares: Vec<(usize, Vec<u8>)> = Vec::new();
                for m in by_group.get(&h).into_iter().flatten() {
                    if !m.served.contains(k) {
                        continue;
                    }
                    let mut payload = m.payload.clone();
                    for other in m.served.without(k).iter() {
                        let known = SegmentId::new(plan.demands.get(other), h.without(other));
                        let seg = cache
                            .get(&known)
                            .ok_or_else(|| mismatch(k, id, "side information missing"))?;
                        xor_into(&mut payload, &encode_share(seg, g, m.server)?);
                    }
                    shares.push((m.server, payload));
                }
                shares.sort_by_key(|s| s.0);
                let refs: Vec<(usize, &[u8])> =
                    shares.iter().map(|(p, s)| (*p, s.as_slice())).collect();
                let seg = decode_segment(&refs, g).map_err(|e| mismatch(k, id, &e.to_string()))?;
                if Some(seg.as_slice()) != truth.get(&id) {
                    return Err(mismatch(k, id, "decoded bytes differ"));
                }
                decoded += 1;
                assembled.extend_from_slice(&seg);
            }
            assembled.truncate(library.original_len(file));
            if assembled != library.original(file) {
                return Err(mismatch(
                    k,
                    SegmentId::new(file, UserSet::EMPTY),
                    "assembled file differs",
                ));
            }
            Ok(())
        };
        let outcome = decode_user();
        verdicts.push(verdict(k, file, decoded, outcome));
    }
    Ok(VerifyReport { verdicts })
}

/// Decoder check for the minimum-storage scheme.
pub fn execute_and_verify_min_storage(
    plan: &TransmissionPlan,
    placement: &MinStoragePlacement,
    library: &FileLibrary,
) -> Result<VerifyReport> {
    let g = &placement.generator;
    let mut verdicts = Vec::with_capacity(placement.users());
    for k in 0..placement.users() {
        let file = plan.demands.get(k);
        let id = SegmentId::new(file, UserSet::EMPTY);
        let shares: Vec<(usize, &[u8])> = plan
            .messages
            .iter()
            .flatten()
            .filter(|m| m.served.contains(k))
            .map(|m| (m.server, m.payload.as_slice()))
            .collect();
        let outcome = if placement.prefix_len() == library.padded_len() {
            Ok(Vec::new())
        } else {
            decode_segment(&shares, g).map_err(|e| mismatch(k, id, &e.to_string()))
        }
        .and_then(|rest| {
            let mut whole = placement.prefix(file).to_vec();
            whole.extend_from_slice(&rest);
            whole.truncate(library.original_len(file));
            if whole == library.original(file) {
                Ok(())
            } else {
                Err(mismatch(k, id, "assembled file differs"))
            }
        });
        let decoded = usize::from(outcome.is_ok() && placement.prefix_len() < library.padded_len());
        verdicts.push(verdict(k, file, decoded, outcome));
    }
    Ok(VerifyReport { verdicts })
}

fn mismatch(user: usize, segment: SegmentId, reason: &str) -> Error {
    Error::DecodeMismatch {
        user,
        segment,
        reason: reason.to_string(),
    }
}
