//! Monte Carlo engine over random topologies, with parameter sweeps.
//!
//! Every trial draws its topology from a ChaCha8 stream keyed by
//! `(seed, trial index)`, so results do not depend on how trials are spread
//! over threads and every sweep point sees the same topologies.
//!
//! A point whose storage or cache lies between integer schemes is split into
//! weighted parts. Per-server rates combine linearly across parts, and the
//! latencies are then read off the combined rates.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    asymptotic_estimate, best_parallel_latency, best_successive_latency,
    expected_latency_corollary1, worst_parallel_latency, worst_successive_latency,
};
use crate::binomial::choose;
use crate::delivery::{
    execute_and_verify, execute_and_verify_min_storage, plan_min_storage, plan_parallel,
    plan_successive_redundant, plan_successive_z0, schedule_min_storage, schedule_parallel,
    schedule_successive_redundant, schedule_successive_z0, LatencyReport, Schedule,
    TransmissionPlan, VerifyReport,
};
use crate::error::{Error, Result};
use crate::mds::make_generator;
use crate::model::{validate_params, DemandVector, FileLibrary, RawParams, SystemParams};
use crate::placement::{min_storage_granule, MinStoragePlacement, Placement};
use crate::scalar::Scalar;
use crate::topology::{sample_topology, Topology};
use crate::{Rational, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Every connected server transmits; only valid without redundancy.
    SuccessiveZ0,
    /// Minimum-cover server selection, successive transmissions.
    SuccessiveRedundant,
    /// Greedy balanced selection, parallel transmissions.
    Parallel,
    /// Identical cached prefix at every user, unicast of the coded rest.
    MinStorage,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::SuccessiveZ0 => "successive_z0",
            PlannerKind::SuccessiveRedundant => "successive_redundant",
            PlannerKind::Parallel => "parallel",
            PlannerKind::MinStorage => "min_storage",
        }
    }

    fn is_successive(self) -> bool {
        matches!(
            self,
            PlannerKind::SuccessiveZ0 | PlannerKind::SuccessiveRedundant
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "M_U")]
    UserCache,
    #[serde(rename = "M_S")]
    ServerStorage,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::UserCache => "M_U",
            SweepParam::ServerStorage => "M_S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    #[serde(with = "rational_list")]
    pub values: Vec<Rational>,
}

mod rational_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::rational_serde;
    use crate::Rational;

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "rational_serde")] Rational);

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|&r| Wrap(r)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        Ok(Vec::<Wrap>::deserialize(d)?
            .into_iter()
            .map(|w| w.0)
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub params: RawParams,
    pub planner: PlannerKind,
    pub trials: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepAxis>,
}

/// An integer scheme that a point delegates a share of every file to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Coded { z: usize, t: usize },
    MinStorage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Part {
    pub weight: Rational,
    pub scheme: Scheme,
}

/// Storage levels of the integer schemes at cache `M_U`, ascending:
/// minimum storage `(N - M_U)/rho`, then `N/(rho - z)` for `z = 0..rho`.
pub fn storage_anchors(params: &SystemParams) -> Vec<(Rational, Option<usize>)> {
    let n = Rational::from_integer(params.files() as i128);
    let rho = params.rho() as i128;
    let floor = (n - params.user_cache()) / Rational::from_integer(rho);
    let mut anchors = Vec::new();
    if floor < n / Rational::from_integer(rho) {
        anchors.push((floor, None));
    }
    for z in 0..params.rho() {
        anchors.push((n / Rational::from_integer(rho - z as i128), Some(z)));
    }
    anchors
}

/// Splits a parameter point into weighted integer schemes. Server storage
/// above `N` is treated as `N`.
pub fn decompose(params: &SystemParams, planner: PlannerKind) -> Result<Vec<Part>> {
    let share = params.memory_share();
    if planner == PlannerKind::MinStorage {
        return Ok(vec![Part {
            weight: Rational::from_integer(1),
            scheme: Scheme::MinStorage,
        }]);
    }
    let anchors = storage_anchors(params);
    let ms = params
        .server_storage()
        .min(anchors.last().expect("rho >= 1").0);
    let mut by_storage: Vec<(Rational, Option<usize>)> = Vec::new();
    if let Some(&(_, z)) = anchors.iter().find(|a| a.0 == ms) {
        by_storage.push((Rational::from_integer(1), z));
    } else {
        let hi = anchors
            .iter()
            .position(|a| a.0 > ms)
            .ok_or_else(|| Error::BadRange(format!("M_S = {ms}")))?;
        if hi == 0 {
            return Err(Error::InfeasibleStorage {
                total: (params.user_cache() + Rational::from_integer(params.rho() as i128) * ms)
                    .to_string(),
                files: params.files(),
            });
        }
        let (a, b) = (anchors[hi - 1], anchors[hi]);
        let lambda = (b.0 - ms) / (b.0 - a.0);
        by_storage.push((lambda, a.1));
        by_storage.push((Rational::from_integer(1) - lambda, b.1));
    }
    let mut parts = Vec::new();
    for (w, z) in by_storage {
        match z {
            None => parts.push(Part {
                weight: w,
                scheme: Scheme::MinStorage,
            }),
            Some(z) => {
                if planner == PlannerKind::SuccessiveZ0 && z > 0 {
                    return Err(Error::InvalidSpec(format!(
                        "server storage {} needs redundancy z = {z}; use successive_redundant",
                        params.server_storage()
                    )));
                }
                for (t, wt) in share.parts() {
                    parts.push(Part {
                        weight: w * wt,
                        scheme: Scheme::Coded { z, t },
                    });
                }
            }
        }
    }
    parts.retain(|p| p.weight != Rational::from_integer(0));
    Ok(parts)
}

fn schedule_for(
    planner: PlannerKind,
    scheme: Scheme,
    topo: &Topology,
    mu: Rational,
) -> Result<Schedule> {
    let rho = topo.rho();
    match (scheme, planner) {
        (Scheme::MinStorage, _) => schedule_min_storage(topo, mu),
        (
            Scheme::Coded { z: 0, t },
            PlannerKind::SuccessiveZ0 | PlannerKind::SuccessiveRedundant,
        ) => schedule_successive_z0(topo, t),
        (Scheme::Coded { z, t }, PlannerKind::SuccessiveRedundant) => {
            schedule_successive_redundant(topo, t, rho - z)
        }
        (Scheme::Coded { z, t }, PlannerKind::Parallel) => schedule_parallel(topo, t, rho - z),
        (Scheme::Coded { .. }, _) => Err(Error::InvalidSpec(format!(
            "{} cannot run a coded scheme",
            planner.name()
        ))),
    }
}

/// Latency of one topology at a (possibly fractional) parameter point.
pub fn evaluate_topology(
    params: &SystemParams,
    planner: PlannerKind,
    parts: &[Part],
    topo: &Topology,
) -> Result<LatencyReport> {
    let mu = params.user_cache() / Rational::from_integer(params.files() as i128);
    let mut rates = vec![Rational::from_integer(0); topo.servers()];
    let mut counts = vec![0usize; topo.servers()];
    for part in parts {
        let lat = schedule_for(planner, part.scheme, topo, mu)?.latency();
        for (p, r) in lat.rates.iter().enumerate() {
            rates[p] += part.weight * r;
            counts[p] += lat.message_counts[p];
        }
    }
    let t_sd = rates.iter().copied().sum();
    let t_pd = rates.iter().copied().max().unwrap_or_default();
    Ok(LatencyReport {
        rates,
        t_sd,
        t_pd,
        message_counts: counts,
    })
}

/// Stream for trial `trial` under master seed `seed`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// Closed-form companions of a Monte Carlo point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Analytic {
    pub corollary1: Option<Real>,
    pub asymptotic: Option<Real>,
    /// Bounds on the planner's own metric: T_sd for successive and minimum
    /// storage, T_pd for parallel.
    pub best: Option<Real>,
    pub worst: Option<Real>,
}

fn analytic(params: &SystemParams, planner: PlannerKind, parts: &[Part]) -> Analytic {
    let (k, p, rho) = (params.users(), params.servers(), params.rho());
    let alpha = Rational::new(rho as i128, p as i128);
    let mu = params.user_cache() / Rational::from_integer(params.files() as i128);
    let unicast_sd = Rational::from_integer(k as i128) * (Rational::from_integer(1) - mu);
    let w = |part: &Part| part.weight.to_f64();
    let all_z0 = parts
        .iter()
        .all(|x| matches!(x.scheme, Scheme::Coded { z: 0, .. } | Scheme::MinStorage));
    let mut out = Analytic::default();

    if planner.is_successive() {
        let mut asym = Some(0.0);
        let mut cor = Rational::from_integer(0);
        for part in parts {
            match part.scheme {
                Scheme::MinStorage => {
                    cor += part.weight * unicast_sd;
                    asym = asym.map(|a| a + w(part) * unicast_sd.to_f64());
                }
                Scheme::Coded { z, t } => {
                    cor += part.weight * expected_latency_corollary1(k, t, &alpha);
                    let est =
                        asymptotic_estimate(k, t, alpha.to_f64(), (rho - z) as f64 / p as f64, p)
                            .ok();
                    asym = asym.zip(est).map(|(a, (e, _))| a + w(part) * e);
                }
            }
        }
        out.asymptotic = asym;
        if all_z0 {
            out.corollary1 = Some(cor.to_f64());
            let mut best = Rational::from_integer(0);
            let mut worst = Rational::from_integer(0);
            for part in parts {
                let (b, wv) = match part.scheme {
                    Scheme::MinStorage => (unicast_sd, unicast_sd),
                    Scheme::Coded { t, .. } => (
                        best_successive_latency(k, t),
                        worst_successive_latency(k, t, p, rho),
                    ),
                };
                best += part.weight * b;
                worst += part.weight * wv;
            }
            out.best = Some(best.to_f64());
            out.worst = Some(worst.to_f64());
        }
    }
    if planner == PlannerKind::MinStorage {
        out.best = Some(unicast_sd.to_f64());
        out.worst = Some(unicast_sd.to_f64());
    }
    if planner == PlannerKind::Parallel && parts.len() == 1 {
        let uncached_share = (Rational::from_integer(1) - mu) / Rational::from_integer(rho as i128);
        let bounds: Option<(Rational, Rational)> = match parts[0].scheme {
            Scheme::Coded { z: 0, t } => Some((
                best_parallel_latency(k, t, p, rho),
                worst_parallel_latency(k, t, rho),
            )),
            Scheme::MinStorage => Some((
                Rational::from_integer((k * rho).div_ceil(p) as i128) * uncached_share,
                Rational::from_integer(k as i128) * uncached_share,
            )),
            Scheme::Coded { .. } => None,
        };
        if let Some((b, wv)) = bounds {
            out.best = Some(b.to_f64());
            out.worst = Some(wv.to_f64());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub trials: usize,
    pub mean_t_sd: Real,
    pub stderr_t_sd: Real,
    pub mean_t_pd: Real,
    pub stderr_t_pd: Real,
    pub analytic: Analytic,
    /// Exact per-trial latencies, in trial order.
    #[serde(skip)]
    pub samples: Vec<(Rational, Rational)>,
}

fn mean_and_stderr(xs: &[Real]) -> (Real, Real) {
    let n = xs.len() as Real;
    let mean = xs.iter().sum::<Real>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<Real>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn check_spec(spec: &ExperimentSpec) -> Result<SystemParams> {
    if spec.trials == 0 {
        return Err(Error::InvalidSpec("trials must be at least 1".into()));
    }
    validate_params(spec.params.clone())
}

fn run_point(
    params: &SystemParams,
    planner: PlannerKind,
    trials: usize,
    seed: u64,
) -> Result<MonteCarloResult> {
    let parts = decompose(params, planner)?;
    let samples: Vec<(Rational, Rational)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let topo = sample_topology(params, &mut trial_rng(seed, trial));
            evaluate_topology(params, planner, &parts, &topo)
                .map(|l| (l.t_sd, l.t_pd))
                .map_err(|e| Error::Trial {
                    trial,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    let sd: Vec<Real> = samples.iter().map(|s| s.0.to_f64()).collect();
    let pd: Vec<Real> = samples.iter().map(|s| s.1.to_f64()).collect();
    let (mean_t_sd, stderr_t_sd) = mean_and_stderr(&sd);
    let (mean_t_pd, stderr_t_pd) = mean_and_stderr(&pd);
    Ok(MonteCarloResult {
        trials,
        mean_t_sd,
        stderr_t_sd,
        mean_t_pd,
        stderr_t_pd,
        analytic: analytic(params, planner, &parts),
        samples,
    })
}

/// Runs the spec at its own parameter point, ignoring any sweep axis.
pub fn run(spec: &ExperimentSpec) -> Result<MonteCarloResult> {
    let params = check_spec(spec)?;
    run_point(&params, spec.planner, spec.trials, spec.seed)
}

/// Parameters of one sweep point.
pub fn sweep_point(base: &RawParams, param: SweepParam, value: Rational) -> Result<SystemParams> {
    let mut raw = base.clone();
    match param {
        SweepParam::UserCache => raw.user_cache = value,
        SweepParam::ServerStorage => raw.server_storage = Some(value),
    }
    validate_params(raw)
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_param: String,
    pub sweep_value: Option<Real>,
    pub planner: PlannerKind,
    pub trials: usize,
    pub seed: u64,
    pub mean_t_sd: Real,
    pub stderr_t_sd: Real,
    pub mean_t_pd: Real,
    pub stderr_t_pd: Real,
    pub analytic_corollary1: Option<Real>,
    pub analytic_asymptotic: Option<Real>,
    pub best_bound: Option<Real>,
    pub worst_bound: Option<Real>,
}

impl SweepRow {
    fn new(
        param: Option<SweepParam>,
        value: Option<Rational>,
        spec: &ExperimentSpec,
        r: &MonteCarloResult,
    ) -> Self {
        SweepRow {
            sweep_param: param.map_or("none", SweepParam::name).to_string(),
            sweep_value: value.map(|v| v.to_f64()),
            planner: spec.planner,
            trials: r.trials,
            seed: spec.seed,
            mean_t_sd: r.mean_t_sd,
            stderr_t_sd: r.stderr_t_sd,
            mean_t_pd: r.mean_t_pd,
            stderr_t_pd: r.stderr_t_pd,
            analytic_corollary1: r.analytic.corollary1,
            analytic_asymptotic: r.analytic.asymptotic,
            best_bound: r.analytic.best,
            worst_bound: r.analytic.worst,
        }
    }
}

/// One row per axis value, all with the same seed; a spec without an axis
/// gives a single row.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    let base = check_spec(spec)?;
    let Some(axis) = &spec.sweep else {
        let r = run_point(&base, spec.planner, spec.trials, spec.seed)?;
        return Ok(vec![SweepRow::new(None, None, spec, &r)]);
    };
    if axis.values.is_empty() {
        return Err(Error::InvalidSpec("sweep axis has no values".into()));
    }
    let points: Vec<SystemParams> = axis
        .values
        .iter()
        .map(|&v| sweep_point(&spec.params, axis.param, v))
        .collect::<Result<_>>()?;
    points
        .iter()
        .zip(&axis.values)
        .map(|(params, &v)| {
            let r = run_point(params, spec.planner, spec.trials, spec.seed)?;
            Ok(SweepRow::new(Some(axis.param), Some(v), spec, &r))
        })
        .collect()
}

pub const CSV_HEADER: &str = "sweep_param,sweep_value,planner,trials,seed,mean_t_sd,stderr_t_sd,mean_t_pd,stderr_t_pd,analytic_corollary1,analytic_asymptotic,best_bound,worst_bound";

/// Header plus one LF-terminated line per row; absent values are empty fields.
pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w);
    out.write_record(CSV_HEADER.split(','))
        .map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        out.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Fault injected into a plan before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Fault {
    DropFirstMessage,
    CorruptFirstMessage,
}

/// Outcome of one end-to-end placement, planning and decoding run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialVerdict {
    pub trial: usize,
    pub planner: PlannerKind,
    pub server_sets: Vec<Vec<usize>>,
    pub demands: Vec<usize>,
    pub messages: usize,
    /// Groups whose cover came from greedy rather than exact search.
    pub greedy_covers: usize,
    pub report: VerifyReport,
}

impl TrialVerdict {
    pub fn passed(&self) -> bool {
        self.report.all_passed()
    }
}

/// Builds a random library, places it, draws a topology and distinct
/// demands from the `(seed, trial)` stream, plans with `planner`, optionally
/// injects a fault and decodes at every user. Needs an integer `t`.
pub fn verify_trial(
    params: &SystemParams,
    planner: PlannerKind,
    seed: u64,
    trial: usize,
    fault: Option<Fault>,
) -> Result<TrialVerdict> {
    let t = params.integer_t().ok_or_else(|| {
        Error::InvalidSpec(format!(
            "end-to-end checks need an integer t, got {}",
            params.t()
        ))
    })?;
    let (k, n, p) = (params.users(), params.files(), params.servers());
    let mut rng = trial_rng(seed, trial);
    let topo = sample_topology(params, &mut rng);
    let demands = DemandVector::random_distinct(k, n, &mut rng)?;
    let mu = params.user_cache() / Rational::from_integer(n as i128);
    let (granule, code_dim) = match planner {
        PlannerKind::MinStorage => (min_storage_granule(mu, params.rho()), params.rho()),
        _ => (
            params.code_dim() * choose(k as u64, t as u64) as usize,
            params.code_dim(),
        ),
    };
    let bytes = if params.file_bytes() > 0 {
        params.file_bytes()
    } else {
        2 * granule - 1
    };
    let library = FileLibrary::random(n, bytes, granule, &mut rng)?;
    let generator = make_generator(code_dim, p)?;
    let inject = |plan: &mut TransmissionPlan| {
        if let (Some(f), Some((s, i))) = (fault, plan.first_message()) {
            match f {
                Fault::DropFirstMessage => {
                    plan.drop_message(s, i);
                }
                Fault::CorruptFirstMessage => {
                    plan.corrupt_message(s, i);
                }
            }
        }
    };
    let (plan, report) = if planner == PlannerKind::MinStorage {
        let placement = MinStoragePlacement::build(&library, k, mu, generator)?;
        let mut plan = plan_min_storage(&topo, &demands, &placement, mu)?;
        inject(&mut plan);
        let report = execute_and_verify_min_storage(&plan, &placement, &library)?;
        (plan, report)
    } else {
        let placement = Placement::build(&library, k, t, generator)?;
        let mut plan = match planner {
            PlannerKind::SuccessiveZ0 => plan_successive_z0(&topo, &demands, &placement)?,
            PlannerKind::SuccessiveRedundant => {
                plan_successive_redundant(&topo, &demands, &placement)?
            }
            _ => plan_parallel(&topo, &demands, &placement)?,
        };
        inject(&mut plan);
        let report = execute_and_verify(&plan, &placement, &library)?;
        (plan, report)
    };
    Ok(TrialVerdict {
        trial,
        planner,
        server_sets: topo.server_sets().to_vec(),
        demands: demands.as_slice().to_vec(),
        messages: plan.total_messages(),
        greedy_covers: plan.schedule.greedy_covers,
        report,
    })
}
