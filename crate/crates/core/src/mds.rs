//! GF(2^8) arithmetic and the (P, rho - z) Vandermonde MDS codec.
//!
//! The field uses the AES reduction polynomial x^8 + x^4 + x^3 + x + 1.
//! Column `l` of the generator is `(1, x_l, x_l^2, ..., x_l^{k-1})` for the
//! evaluation point `x_l = l`; distinct points make every k-column minor a
//! nonzero Vandermonde determinant.

use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const POLY: u16 = 0x11b;

struct Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

const TABLES: Tables = build_tables();

const fn build_tables() -> Tables {
    let mut exp = [0u8; 512];
    let mut log = [0u8; 256];
    let mut x: u16 = 1;
    let mut i = 0;
    while i < 255 {
        exp[i] = x as u8;
        exp[i + 255] = x as u8;
        log[x as usize] = i as u8;
        // multiply by the generator 0x03 = x + 1
        x ^= x << 1;
        if x & 0x100 != 0 {
            x ^= POLY;
        }
        i += 1;
    }
    exp[510] = exp[0];
    exp[511] = exp[1];
    Tables { exp, log }
}

/// One byte interpreted as an element of GF(2^8).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gf256(pub u8);

impl Gf256 {
    pub const ZERO: Gf256 = Gf256(0);
    pub const ONE: Gf256 = Gf256(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn inv(self) -> Option<Gf256> {
        if self.0 == 0 {
            None
        } else {
            Some(Gf256(
                TABLES.exp[255 - TABLES.log[self.0 as usize] as usize],
            ))
        }
    }

    pub fn pow(self, e: usize) -> Gf256 {
        if e == 0 {
            return Gf256::ONE;
        }
        if self.0 == 0 {
            return Gf256::ZERO;
        }
        let l = TABLES.log[self.0 as usize] as usize * (e % 255) % 255;
        Gf256(TABLES.exp[l])
    }
}

impl fmt::Debug for Gf256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#04x}", self.0)
    }
}

impl Add for Gf256 {
    type Output = Gf256;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn add(self, rhs: Gf256) -> Gf256 {
        Gf256(self.0 ^ rhs.0)
    }
}

impl AddAssign for Gf256 {
    fn add_assign(&mut self, rhs: Gf256) {
        self.0 ^= rhs.0;
    }
}

impl Mul for Gf256 {
    type Output = Gf256;
    fn mul(self, rhs: Gf256) -> Gf256 {
        if self.0 == 0 || rhs.0 == 0 {
            return Gf256::ZERO;
        }
        let l = TABLES.log[self.0 as usize] as usize + TABLES.log[rhs.0 as usize] as usize;
        Gf256(TABLES.exp[l])
    }
}

impl Div for Gf256 {
    type Output = Gf256;
    fn div(self, rhs: Gf256) -> Gf256 {
        self * rhs.inv().expect("division by zero in GF(2^8)")
    }
}

/// `acc[i] ^= c * src[i]` for every byte.
fn mul_add_into(acc: &mut [u8], c: Gf256, src: &[u8]) {
    match c.0 {
        0 => {}
        1 => acc.iter_mut().zip(src).for_each(|(a, s)| *a ^= s),
        _ => {
            let lc = TABLES.log[c.0 as usize] as usize;
            for (a, &s) in acc.iter_mut().zip(src) {
                if s != 0 {
                    *a ^= TABLES.exp[lc + TABLES.log[s as usize] as usize];
                }
            }
        }
    }
}

/// Largest supported code length.
pub const MAX_CODE_LEN: usize = 255;

/// k x n Vandermonde generator shared by servers (to store) and users (to
/// recompute the coded form of cached segments).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorMatrix {
    k: usize,
    n: usize,
    points: Vec<Gf256>,
    /// Row-major, `entries[m][l] = points[l]^m`.
    entries: Vec<Vec<Gf256>>,
}

pub fn make_generator(k: usize, n: usize) -> Result<GeneratorMatrix> {
    if k == 0 || k > n || n > MAX_CODE_LEN {
        return Err(Error::BadRange(format!(
            "need 1 <= k <= n <= {MAX_CODE_LEN}, got k = {k}, n = {n}"
        )));
    }
    let points: Vec<Gf256> = (0..n).map(|l| Gf256(l as u8)).collect();
    let entries = (0..k)
        .map(|m| points.iter().map(|x| x.pow(m)).collect())
        .collect();
    Ok(GeneratorMatrix {
        k,
        n,
        points,
        entries,
    })
}

impl GeneratorMatrix {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn evaluation_points(&self) -> &[Gf256] {
        &self.points
    }

    pub fn entry(&self, row: usize, col: usize) -> Gf256 {
        self.entries[row][col]
    }

    pub fn column(&self, col: usize) -> Vec<Gf256> {
        (0..self.k).map(|m| self.entries[m][col]).collect()
    }
}

fn check_divisible(len: usize, k: usize) -> Result<usize> {
    if len % k != 0 {
        return Err(Error::BadLength(format!(
            "segment of {len} bytes is not divisible into {k} subsegments"
        )));
    }
    Ok(len / k)
}

/// Coded subsegment `l`: `sum_m g[m][l] * subsegment_m`, byte-wise.
pub fn encode_share(segment: &[u8], g: &GeneratorMatrix, l: usize) -> Result<Vec<u8>> {
    if l >= g.n {
        return Err(Error::BadRange(format!(
            "share index {l} outside [0, {})",
            g.n
        )));
    }
    let sub = check_divisible(segment.len(), g.k)?;
    let mut out = vec![0u8; sub];
    for (m, chunk) in segment.chunks_exact(sub.max(1)).enumerate().take(g.k) {
        mul_add_into(&mut out, g.entries[m][l], chunk);
    }
    Ok(out)
}

/// All n coded subsegments of a segment.
pub fn encode_segment(segment: &[u8], g: &GeneratorMatrix) -> Result<Vec<Vec<u8>>> {
    check_divisible(segment.len(), g.k)?;
    (0..g.n).map(|l| encode_share(segment, g, l)).collect()
}

/// Recovers a segment from at least k shares with distinct server indices.
/// Extra shares beyond the first k distinct indices are ignored.
pub fn decode_segment(shares: &[(usize, &[u8])], g: &GeneratorMatrix) -> Result<Vec<u8>> {
    let mut picked: Vec<(usize, &[u8])> = Vec::with_capacity(g.k);
    for &(l, payload) in shares {
        if l >= g.n {
            return Err(Error::BadRange(format!(
                "share index {l} outside [0, {})",
                g.n
            )));
        }
        if picked.iter().any(|&(p, _)| p == l) {
            continue;
        }
        picked.push((l, payload));
        if picked.len() == g.k {
            break;
        }
    }
    if picked.len() < g.k {
        return Err(Error::NotEnoughShares {
            have: picked.len(),
            need: g.k,
        });
    }
    let sub = picked[0].1.len();
    if picked.iter().any(|(_, p)| p.len() != sub) {
        return Err(Error::BadLength("shares have unequal lengths".into()));
    }

    // share_i = sum_m g[m][l_i] * s_m, i.e. V s = y with V[i][m] = g[m][l_i].
    // Gauss-Jordan on V, applying the same row operations to the payloads.
    let k = g.k;
    let mut v: Vec<Vec<Gf256>> = picked.iter().map(|&(l, _)| g.column(l)).collect();
    let mut y: Vec<Vec<u8>> = picked.iter().map(|&(_, p)| p.to_vec()).collect();
    let servers = || picked.iter().map(|&(l, _)| l).collect::<Vec<_>>();
    for col in 0..k {
        let pivot = (col..k)
            .find(|&r| !v[r][col].is_zero())
            .ok_or_else(|| Error::SingularSystem { servers: servers() })?;
        v.swap(col, pivot);
        y.swap(col, pivot);
        let inv = v[col][col].inv().expect("nonzero pivot");
        for e in v[col].iter_mut() {
            *e = *e * inv;
        }
        let row = std::mem::take(&mut y[col]);
        let mut scaled = vec![0u8; sub];
        mul_add_into(&mut scaled, inv, &row);
        y[col] = scaled;
        for r in 0..k {
            if r == col || v[r][col].is_zero() {
                continue;
            }
            let factor = v[r][col];
            for c in 0..k {
                let d = factor * v[col][c];
                v[r][c] += d;
            }
            let (src, dst) = if r < col {
                let (a, b) = y.split_at_mut(col);
                (&b[0], &mut a[r])
            } else {
                let (a, b) = y.split_at_mut(r);
                (&a[col], &mut b[0])
            };
            mul_add_into(dst, factor, src);
        }
    }
    Ok(y.concat())
}
