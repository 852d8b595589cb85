//! Closed-form latency evaluators.
//!
//! Exact formulas are generic over [`Scalar`]; the asymptotic cover estimate
//! is generic over [`num_traits::Float`]. Binomials with `r > n` or `r < 0`
//! are zero throughout.

use num_traits::Float;

use crate::binomial::{choose, choose_signed};
use crate::error::{Error, Result};
use crate::scalar::{powi, Scalar};

fn binom<S: Scalar>(n: i64, r: i64) -> S {
    S::from_u128(choose_signed(n, r))
}

/// Normalized rate of a server with `q_p` users:
/// `[C(K, t+1) - C(K - q_p, t+1)] / (rho_eff C(K, t))`.
pub fn rate_per_server<S: Scalar>(q_p: usize, users: usize, t: usize, rho_eff: usize) -> S {
    let (k, t) = (users as i64, t as i64);
    let num = binom::<S>(k, t + 1) - binom::<S>(k - q_p as i64, t + 1);
    num / (S::from_usize(rho_eff) * binom::<S>(k, t))
}

/// Successive latency of a topology from its type vector `g` (`g[i]` servers
/// with `i` users), for the scheme with every connected server transmitting.
pub fn successive_latency_closed_form<S: Scalar>(
    g: &[usize],
    users: usize,
    t: usize,
    servers: usize,
    rho: usize,
) -> Result<S> {
    let count: usize = g.iter().sum();
    let links: usize = g.iter().enumerate().map(|(i, gi)| i * gi).sum();
    if count != servers
        || links != users * rho
        || g.len() > users + 1 && g[users + 1..].iter().any(|&x| x > 0)
    {
        return Err(Error::InconsistentType(format!(
            "sum g = {count} (P = {servers}), sum i g_i = {links} (K rho = {})",
            users * rho
        )));
    }
    let (k, ti) = (users as i64, t as i64);
    let inv_alpha = S::from_ratio(servers as i128, rho as i128);
    let lead = inv_alpha * S::from_ratio((k - ti) as i128, (ti + 1) as i128);
    let mut correction = S::zero();
    for (i, &gi) in g.iter().enumerate() {
        correction = correction + S::from_usize(gi) * binom::<S>(k - i as i64, ti + 1);
    }
    Ok(lead - correction / (S::from_usize(rho) * binom::<S>(k, ti)))
}

/// `Pr(q_p = i) = C(K, i) alpha^i (1 - alpha)^(K - i)`.
pub fn connection_prob<S: Scalar>(i: usize, users: usize, alpha: &S) -> S {
    if i > users {
        return S::zero();
    }
    let rest = S::one() - alpha.clone();
    S::from_u128(choose(users as u64, i as u64))
        * powi(alpha, i as u32)
        * powi(&rest, (users - i) as u32)
}

/// Expected successive latency for a load distribution `w` over `0..=K`.
pub fn expected_latency_theorem1<S: Scalar>(
    w: &[S],
    users: usize,
    t: usize,
    alpha: &S,
) -> Result<S> {
    let total = w.iter().cloned().fold(S::zero(), |a, b| a + b);
    if total != S::one() && (total.to_f64() - 1.0).abs() > 1e-9 {
        return Err(Error::BadDistribution(format!("{total:?}")));
    }
    let (k, ti) = (users as i64, t as i64);
    let lead = S::from_ratio((k - ti) as i128, (ti + 1) as i128) / alpha.clone();
    let mut correction = S::zero();
    for (i, wi) in w.iter().enumerate() {
        correction = correction + wi.clone() * binom::<S>(k - i as i64, ti + 1);
    }
    Ok(lead - correction / (alpha.clone() * binom::<S>(k, ti)))
}

/// Expected successive latency under uniform connectivity:
/// `((K - t)/(t + 1)) (1 - (1 - alpha)^(t+1)) / alpha`.
pub fn expected_latency_corollary1<S: Scalar>(users: usize, t: usize, alpha: &S) -> S {
    let rest = S::one() - alpha.clone();
    let miss = S::one() - powi(&rest, t as u32 + 1);
    S::from_ratio(users as i128 - t as i128, t as i128 + 1) * miss / alpha.clone()
}

/// `C(n1, r) + C(n2, r) >= C(n1 + 1, r) + C(n2 - 1, r)` for `r <= n1`, `n1 + 2 <= n2`.
pub fn lemma1_check(n1: u64, n2: u64, r: u64) -> Result<bool> {
    if r > n1 || n1 + 2 > n2 {
        return Err(Error::BadRange(format!(
            "need r <= n1 and n1 + 2 <= n2, got ({n1}, {n2}, {r})"
        )));
    }
    Ok(choose(n1, r) + choose(n2, r) >= choose(n1 + 1, r) + choose(n2 - 1, r))
}

/// Intermediate quantities of the asymptotic cover estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticState<F> {
    pub u: usize,
    pub delta_prime: F,
    pub delta: F,
    /// `beta[i]`: fraction of servers reaching exactly `i` members of a group.
    pub beta: Vec<F>,
    /// Estimated minimum cover size per group.
    pub l: F,
}

/// Large-P estimate of the expected successive latency with redundancy,
/// from the expected profile of group members per server.
pub fn asymptotic_estimate<F: Float>(
    users: usize,
    t: usize,
    alpha: F,
    alpha_hat: F,
    servers: usize,
) -> Result<(F, AsymptoticState<F>)> {
    let zero = F::zero();
    let one = F::one();
    if !(alpha_hat > zero && alpha_hat <= alpha && alpha <= one) || t > users {
        return Err(Error::BadRange(
            "need 0 < alpha_hat <= alpha <= 1 and t <= K".into(),
        ));
    }
    let p = F::from(servers).expect("fits");
    let g = t + 1;
    let gf = F::from(g).expect("fits");
    let beta: Vec<F> = (0..=g)
        .map(|i| {
            F::from(choose(g as u64, i as u64)).expect("fits")
                * alpha.powi(i as i32)
                * (one - alpha).powi((g - i) as i32)
        })
        .collect();
    let slack = F::from(1e-12).expect("fits");
    let target = gf * alpha_hat;
    let mut filled = zero;
    let mut cover_full = zero;
    for u in 0..=t {
        let width = F::from(g - u).expect("fits");
        let residual = target - filled;
        if residual >= -slack && residual <= width * beta[g - u] + slack {
            let residual = residual.max(zero);
            let c = F::from(g.div_ceil(g - u)).expect("fits");
            let delta_prime = p * residual / c;
            let delta = delta_prime / width;
            let l = p * cover_full + delta * c;
            let rho_eff = alpha_hat * p;
            let estimate = F::from(users - t).expect("fits") / gf * l / rho_eff;
            return Ok((
                estimate,
                AsymptoticState {
                    u,
                    delta_prime,
                    delta,
                    beta,
                    l,
                },
            ));
        }
        filled = filled + width * beta[g - u];
        cover_full = cover_full + beta[g - u];
    }
    Err(Error::NoBracket(format!(
        "target {:?}, beta {:?}",
        target.to_f64(),
        beta.iter().map(|b| b.to_f64()).collect::<Vec<_>>()
    )))
}

/// Achievability-matching lower bound for `z = 0` and uncoded caches.
pub fn lower_bound_z0<S: Scalar>(q: &[usize], users: usize, t: usize, rho: usize) -> S {
    q.iter()
        .map(|&qp| rate_per_server::<S>(qp, users, t, rho))
        .fold(S::zero(), |a, b| a + b)
}

/// `(K - t, (K / rho)(1 - M_U / N))` for the minimum-storage scheme.
pub fn min_storage_latencies<S: Scalar>(
    users: usize,
    rho: usize,
    user_cache: &S,
    files: usize,
) -> (S, S) {
    let uncached = S::one() - user_cache.clone() / S::from_usize(files);
    let k = S::from_usize(users);
    (
        k.clone() * uncached.clone(),
        k / S::from_usize(rho) * uncached,
    )
}

/// `(K - t)/(t + 1)`: every user on the same servers.
pub fn best_successive_latency<S: Scalar>(users: usize, t: usize) -> S {
    S::from_ratio(users as i128 - t as i128, t as i128 + 1)
}

/// Loads as equal as possible: `Kρ mod P` servers carry one extra user.
pub fn balanced_loads(users: usize, servers: usize, rho: usize) -> Vec<usize> {
    let links = users * rho;
    (0..servers)
        .map(|p| links / servers + usize::from(p < links % servers))
        .collect()
}

/// Largest successive latency over all topologies, attained by balanced loads.
pub fn worst_successive_latency<S: Scalar>(
    users: usize,
    t: usize,
    servers: usize,
    rho: usize,
) -> S {
    lower_bound_z0(&balanced_loads(users, servers, rho), users, t, rho)
}

/// Smallest parallel latency for `z = 0`: the busiest server has `ceil(K rho / P)` users.
pub fn best_parallel_latency<S: Scalar>(users: usize, t: usize, servers: usize, rho: usize) -> S {
    rate_per_server((users * rho).div_ceil(servers), users, t, rho)
}

/// Largest parallel latency for `z = 0`: some server reaches every user.
pub fn worst_parallel_latency<S: Scalar>(users: usize, t: usize, rho: usize) -> S {
    rate_per_server(users, users, t, rho)
}
