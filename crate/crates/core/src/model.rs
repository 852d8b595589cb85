//! Problem parameters, the file library, demand vectors and segment ids.

use std::fmt;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index::sample;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::binomial::choose;
use crate::error::{Error, Result};
use crate::subset::{UserSet, MAX_USERS};
use crate::Rational;

pub use crate::subset::subsets_of_size;

/// Caller-supplied parameters before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawParams {
    /// K
    pub users: usize,
    /// N
    pub files: usize,
    /// P
    pub servers: usize,
    pub rho: usize,
    /// Storage redundancy level, `0 <= z <= rho - 1`.
    #[serde(default)]
    pub z: usize,
    /// M_U, in files.
    #[serde(with = "rational_serde")]
    pub user_cache: Rational,
    /// M_S, in files. Derived as `N / (rho - z)` when absent.
    #[serde(
        default,
        with = "opt_rational_serde",
        skip_serializing_if = "Option::is_none"
    )]
    pub server_storage: Option<Rational>,
    /// F, in bytes, before padding. Zero when no payloads are materialized.
    #[serde(default)]
    pub file_bytes: usize,
}

impl RawParams {
    pub fn new(
        users: usize,
        files: usize,
        servers: usize,
        rho: usize,
        z: usize,
        user_cache: Rational,
    ) -> Self {
        RawParams {
            users,
            files,
            servers,
            rho,
            z,
            user_cache,
            server_storage: None,
            file_bytes: 0,
        }
    }

    /// Parameters with `M_U = N t / K` for an integer caching parameter `t`.
    pub fn with_t(
        users: usize,
        files: usize,
        servers: usize,
        rho: usize,
        z: usize,
        t: usize,
    ) -> Self {
        let m_u = Rational::new((files * t) as i128, users.max(1) as i128);
        RawParams::new(users, files, servers, rho, z, m_u)
    }
}

/// Validated parameters with every derived quantity populated.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemParams {
    users: usize,
    files: usize,
    servers: usize,
    rho: usize,
    z: usize,
    file_bytes: usize,
    #[serde(with = "rational_serde")]
    user_cache: Rational,
    #[serde(with = "rational_serde")]
    server_storage: Rational,
    server_storage_explicit: bool,
    #[serde(with = "rational_serde")]
    t: Rational,
    #[serde(with = "rational_serde")]
    alpha: Rational,
    #[serde(with = "rational_serde")]
    alpha_hat: Rational,
}

pub fn validate_params(raw: RawParams) -> Result<SystemParams> {
    let RawParams {
        users,
        files,
        servers,
        rho,
        z,
        user_cache,
        server_storage,
        file_bytes,
    } = raw;
    if users == 0 || users > MAX_USERS {
        return Err(Error::BadRange(format!(
            "K = {users} must lie in [1, {MAX_USERS}]"
        )));
    }
    if servers == 0 {
        return Err(Error::BadRange("P must be at least 1".into()));
    }
    if rho == 0 || rho > servers {
        return Err(Error::BadRange(format!(
            "rho = {rho} must lie in [1, P = {servers}]"
        )));
    }
    if z >= rho {
        return Err(Error::BadRange(format!(
            "z = {z} must lie in [0, rho - 1 = {}]",
            rho - 1
        )));
    }
    if files < users {
        return Err(Error::BadRange(format!(
            "worst-case demands need N >= K, got N = {files}, K = {users}"
        )));
    }
    let n = Rational::from_integer(files as i128);
    if user_cache < Rational::zero() || user_cache > n {
        return Err(Error::BadRange(format!(
            "M_U = {user_cache} must lie in [0, N = {files}]"
        )));
    }
    let (server_storage, explicit) = match server_storage {
        Some(ms) if ms < Rational::zero() => {
            return Err(Error::BadRange(format!("M_S = {ms} must be nonnegative")));
        }
        Some(ms) => (ms, true),
        None => (n / Rational::from_integer((rho - z) as i128), false),
    };
    let total = user_cache + Rational::from_integer(rho as i128) * server_storage;
    if total < n {
        return Err(Error::InfeasibleStorage {
            total: total.to_string(),
            files,
        });
    }
    let t = Rational::from_integer(users as i128) * user_cache / n;
    Ok(SystemParams {
        users,
        files,
        servers,
        rho,
        z,
        file_bytes,
        user_cache,
        server_storage,
        server_storage_explicit: explicit,
        t,
        alpha: Rational::new(rho as i128, servers as i128),
        alpha_hat: Rational::new((rho - z) as i128, servers as i128),
    })
}

impl SystemParams {
    pub fn users(&self) -> usize {
        self.users
    }
    pub fn files(&self) -> usize {
        self.files
    }
    pub fn servers(&self) -> usize {
        self.servers
    }
    pub fn rho(&self) -> usize {
        self.rho
    }
    pub fn z(&self) -> usize {
        self.z
    }
    /// `rho - z`, the MDS code dimension.
    pub fn code_dim(&self) -> usize {
        self.rho - self.z
    }
    pub fn file_bytes(&self) -> usize {
        self.file_bytes
    }
    pub fn user_cache(&self) -> Rational {
        self.user_cache
    }
    pub fn server_storage(&self) -> Rational {
        self.server_storage
    }
    pub fn t(&self) -> Rational {
        self.t
    }
    pub fn alpha(&self) -> Rational {
        self.alpha
    }
    pub fn alpha_hat(&self) -> Rational {
        self.alpha_hat
    }

    /// `Some(t)` when the caching parameter is an integer.
    pub fn integer_t(&self) -> Option<usize> {
        self.t.is_integer().then(|| self.t.to_integer() as usize)
    }

    pub fn memory_share(&self) -> MemoryShare {
        memory_share_split(self.t, self.users).expect("validated t lies in [0, K]")
    }

    /// Byte granularity every padded file length must be a multiple of so that
    /// both memory-sharing schemes split into whole subsegments.
    pub fn padding_granule(&self) -> usize {
        let share = self.memory_share();
        let k = self.code_dim() as u128;
        let lo = k * choose(self.users as u64, share.lo as u64);
        let hi = k * choose(self.users as u64, share.hi as u64);
        lo.lcm(&hi) as usize
    }

    /// Same parameters with a different redundancy level.
    pub fn with_z(&self, z: usize) -> Result<SystemParams> {
        let mut raw = RawParams::from(self);
        raw.z = z;
        raw.server_storage = None;
        validate_params(raw)
    }
}

impl From<&SystemParams> for RawParams {
    fn from(p: &SystemParams) -> Self {
        RawParams {
            users: p.users,
            files: p.files,
            servers: p.servers,
            rho: p.rho,
            z: p.z,
            user_cache: p.user_cache,
            server_storage: p.server_storage_explicit.then_some(p.server_storage),
            file_bytes: p.file_bytes,
        }
    }
}

/// Split of a fractional caching parameter into two integer schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryShare {
    pub lo: usize,
    pub hi: usize,
    /// Fraction of each file handled by the `lo` scheme.
    pub lambda: Rational,
}

impl MemoryShare {
    /// `lambda * at_lo + (1 - lambda) * at_hi`.
    pub fn combine(&self, at_lo: Rational, at_hi: Rational) -> Rational {
        self.lambda * at_lo + (Rational::one() - self.lambda) * at_hi
    }

    /// The integer schemes with nonzero weight, with their weights.
    pub fn parts(&self) -> Vec<(usize, Rational)> {
        if self.lo == self.hi {
            vec![(self.lo, Rational::one())]
        } else {
            vec![
                (self.lo, self.lambda),
                (self.hi, Rational::one() - self.lambda),
            ]
        }
    }
}

pub fn memory_share_split(t_real: Rational, users: usize) -> Result<MemoryShare> {
    if t_real < Rational::zero() || t_real > Rational::from_integer(users as i128) {
        return Err(Error::BadRange(format!(
            "t = {t_real} must lie in [0, K = {users}]"
        )));
    }
    let lo = t_real.floor().to_integer() as usize;
    let hi = t_real.ceil().to_integer() as usize;
    let lambda = if lo == hi {
        Rational::one()
    } else {
        Rational::from_integer(hi as i128) - t_real
    };
    Ok(MemoryShare { lo, hi, lambda })
}

/// N equal-length (padded) files plus their original lengths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileLibrary {
    files: Vec<Vec<u8>>,
    original_lens: Vec<usize>,
}

impl FileLibrary {
    /// Zero-pads every file to the smallest common multiple of `granule`
    /// that holds the longest file.
    pub fn new(mut files: Vec<Vec<u8>>, granule: usize) -> Result<Self> {
        if granule == 0 {
            return Err(Error::BadLength("padding granule must be positive".into()));
        }
        if files.is_empty() {
            return Err(Error::BadRange("library needs at least one file".into()));
        }
        let original_lens: Vec<usize> = files.iter().map(Vec::len).collect();
        let longest = original_lens.iter().copied().max().unwrap_or(0).max(1);
        let padded = longest.div_ceil(granule) * granule;
        for f in &mut files {
            f.resize(padded, 0);
        }
        Ok(FileLibrary {
            files,
            original_lens,
        })
    }

    pub fn random<R: RngCore + ?Sized>(
        count: usize,
        bytes: usize,
        granule: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let files = (0..count)
            .map(|_| {
                let mut f = vec![0u8; bytes];
                rng.fill_bytes(&mut f);
                f
            })
            .collect();
        FileLibrary::new(files, granule)
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn padded_len(&self) -> usize {
        self.files[0].len()
    }

    /// Padded contents of file `j` (0-based).
    pub fn file(&self, j: usize) -> &[u8] {
        &self.files[j]
    }

    /// File `j` with padding stripped.
    pub fn original(&self, j: usize) -> &[u8] {
        &self.files[j][..self.original_lens[j]]
    }

    pub fn original_len(&self, j: usize) -> usize {
        self.original_lens[j]
    }
}

/// `d_k` for every user, 0-based file indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    /// Demands in worst-case mode: entries must be distinct.
    pub fn worst_case(d: Vec<usize>, files: usize) -> Result<Self> {
        let mut seen = vec![false; files];
        for &j in &d {
            if j >= files {
                return Err(Error::BadRange(format!(
                    "demand {j} outside [0, N = {files})"
                )));
            }
            if std::mem::replace(&mut seen[j], true) {
                return Err(Error::BadRange(format!(
                    "file {j} requested twice in worst-case mode"
                )));
            }
        }
        Ok(DemandVector(d))
    }

    /// User `k` requests file `k`.
    pub fn identity(users: usize) -> Self {
        DemandVector((0..users).collect())
    }

    /// Uniformly random distinct demands.
    pub fn random_distinct<R: Rng + ?Sized>(
        users: usize,
        files: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if users > files {
            return Err(Error::BadRange(format!(
                "cannot draw {users} distinct files from {files}"
            )));
        }
        Ok(DemandVector(sample(rng, files, users).into_vec()))
    }

    pub fn get(&self, user: usize) -> usize {
        self.0[user]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

/// Identifies the segment `W_{j,A}`: file `j`, cached exactly by the users in `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentId {
    pub file: usize,
    pub subset: UserSet,
}

impl SegmentId {
    pub fn new(file: usize, subset: UserSet) -> Self {
        SegmentId { file, subset }
    }

    /// Index of the subset in colex order.
    pub fn rank(&self) -> usize {
        self.subset.colex_rank()
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W[{},{}]", self.file, self.subset)
    }
}

/// Parses `"5/4"`, `"1.25"` or `"3"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::BadRange(format!("not a rational number: {s:?}"));
    if let Some((num, den)) = s.split_once('/') {
        let num: i128 = num.trim().parse().map_err(|_| bad())?;
        let den: i128 = den.trim().parse().map_err(|_| bad())?;
        if den == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(num, den));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let negative = int.starts_with('-');
        let int_part: i128 = if int.is_empty() || int == "-" {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) || frac.len() > 18 {
            return Err(bad());
        }
        let den = 10i128.pow(frac.len() as u32);
        let frac_part: i128 = frac.parse().map_err(|_| bad())?;
        let magnitude = Rational::from_integer(int_part.abs()) + Rational::new(frac_part, den);
        return Ok(if negative { -magnitude } else { magnitude });
    }
    s.parse::<i128>()
        .map(Rational::from_integer)
        .map_err(|_| bad())
}

/// Nearest rational with a small denominator, for JSON numbers.
pub fn rational_from_f64(x: f64) -> Result<Rational> {
    if !x.is_finite() {
        return Err(Error::BadRange(format!("not a finite number: {x}")));
    }
    Rational::approximate_float(x)
        .filter(|r| (r.to_f64().unwrap_or(f64::NAN) - x).abs() <= 1e-9 * x.abs().max(1.0))
        .ok_or_else(|| Error::BadRange(format!("cannot represent {x} as a rational")))
}

/// Serializes rationals as `"num/den"`; accepts strings or JSON numbers.
pub mod rational_serde {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    use crate::Rational;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        if r.is_integer() {
            s.serialize_str(&r.numer().to_string())
        } else {
            s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        d.deserialize_any(RationalVisitor)
    }

    pub(super) struct RationalVisitor;

    impl<'de> Visitor<'de> for RationalVisitor {
        type Value = Rational;

        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("a number or a string like \"5/4\"")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
            super::parse_rational(v).map_err(E::custom)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v as i128))
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
            Ok(Rational::from_integer(v as i128))
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
            super::rational_from_f64(v).map_err(E::custom)
        }
    }
}

pub mod opt_rational_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::Rational;

    pub fn serialize<S: Serializer>(r: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
        match r {
            Some(r) => super::rational_serde::serialize(r, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
        #[derive(Deserialize)]
        struct Wrap(#[serde(with = "super::rational_serde")] Rational);
        Option::<Wrap>::deserialize(d).map(|o| o.map(|w| w.0))
    }
}
