//! Placement phase: segmentation, MDS-coded server storage and uncoded user
//! caches. Nothing here looks at the topology or the demands.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::binomial::choose;
use crate::error::{Error, Result};
use crate::mds::{encode_segment, GeneratorMatrix};
use crate::model::{FileLibrary, SegmentId};
use crate::subset::{subsets_of_size, UserSet};
use crate::Rational;

use num_traits::{One, Zero};

/// `W_{j,A}` for every file and every t-subset, indexed `[file][colex rank]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segments {
    users: usize,
    t: usize,
    subsets: Vec<UserSet>,
    data: Vec<Vec<Vec<u8>>>,
}

impl Segments {
    pub fn users(&self) -> usize {
        self.users
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn files(&self) -> usize {
        self.data.len()
    }

    /// The t-subsets in colex order.
    pub fn subsets(&self) -> &[UserSet] {
        &self.subsets
    }

    pub fn segment_len(&self) -> usize {
        self.data
            .first()
            .and_then(|f| f.first())
            .map_or(0, Vec::len)
    }

    pub fn get(&self, id: &SegmentId) -> Option<&[u8]> {
        if id.subset.len() != self.t {
            return None;
        }
        self.data.get(id.file)?.get(id.rank()).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (SegmentId, &[u8])> {
        self.data.iter().enumerate().flat_map(move |(j, segs)| {
            segs.iter()
                .zip(&self.subsets)
                .map(move |(s, &a)| (SegmentId::new(j, a), s.as_slice()))
        })
    }

    /// Concatenation of the segments of file `j` in colex order.
    pub fn reassemble(&self, file: usize) -> Vec<u8> {
        self.data[file].concat()
    }
}

pub fn segment_library(library: &FileLibrary, users: usize, t: usize) -> Result<Segments> {
    if t > users {
        return Err(Error::BadRange(format!("t = {t} exceeds K = {users}")));
    }
    let count = choose(users as u64, t as u64) as usize;
    let f = library.padded_len();
    if f % count != 0 {
        return Err(Error::BadLength(format!(
            "file length {f} is not divisible into C({users},{t}) = {count} segments"
        )));
    }
    let seg = f / count;
    let subsets: Vec<UserSet> = subsets_of_size(users, t).collect();
    let data = (0..library.len())
        .map(|j| {
            library
                .file(j)
                .chunks(seg.max(1))
                .take(count)
                .map(<[u8]>::to_vec)
                .collect::<Vec<_>>()
        })
        .map(|mut v| {
            // zero-length files still get one (empty) entry per subset
            v.resize(count, Vec::new());
            v
        })
        .collect();
    Ok(Segments {
        users,
        t,
        subsets,
        data,
    })
}

/// Server `p`'s share `C^p_{j,A}` of every segment, indexed `[file][rank]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerStorage {
    server: usize,
    subsets: Vec<UserSet>,
    shards: Vec<Vec<Vec<u8>>>,
}

impl ServerStorage {
    pub fn server(&self) -> usize {
        self.server
    }

    pub fn get(&self, id: &SegmentId) -> Option<&[u8]> {
        if id.subset.len() != self.subsets.first().map_or(0, |s| s.len()) {
            return None;
        }
        self.shards.get(id.file)?.get(id.rank()).map(Vec::as_slice)
    }

    pub fn shard_count(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }

    pub fn stored_bytes(&self) -> usize {
        self.shards.iter().flatten().map(Vec::len).sum()
    }
}

pub fn place_servers(segments: &Segments, g: &GeneratorMatrix) -> Result<Vec<ServerStorage>> {
    let mut storages: Vec<ServerStorage> = (0..g.n())
        .map(|p| ServerStorage {
            server: p,
            subsets: segments.subsets.clone(),
            shards: vec![Vec::with_capacity(segments.subsets.len()); segments.files()],
        })
        .collect();
    for (j, segs) in segments.data.iter().enumerate() {
        for seg in segs {
            for (p, share) in encode_segment(seg, g)?.into_iter().enumerate() {
                storages[p].shards[j].push(share);
            }
        }
    }
    Ok(storages)
}

/// Plaintext segments `W_{j,A}` with `k in A`, for every file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserCache {
    user: usize,
    segments: BTreeMap<SegmentId, Vec<u8>>,
}

impl UserCache {
    pub fn user(&self) -> usize {
        self.user
    }

    pub fn get(&self, id: &SegmentId) -> Option<&[u8]> {
        self.segments.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn stored_bytes(&self) -> usize {
        self.segments.values().map(Vec::len).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = &SegmentId> {
        self.segments.keys()
    }
}

pub fn place_user_caches(segments: &Segments) -> Vec<UserCache> {
    (0..segments.users)
        .map(|k| UserCache {
            user: k,
            segments: segments
                .iter()
                .filter(|(id, _)| id.subset.contains(k))
                .map(|(id, s)| (id, s.to_vec()))
                .collect(),
        })
        .collect()
}

/// Everything the delivery phase may touch, built once per (library, t, code).
#[derive(Debug, Clone)]
pub struct Placement {
    pub generator: GeneratorMatrix,
    pub servers: Vec<ServerStorage>,
    pub caches: Vec<UserCache>,
    users: usize,
    t: usize,
    segment_len: usize,
}

impl Placement {
    pub fn build(
        library: &FileLibrary,
        users: usize,
        t: usize,
        generator: GeneratorMatrix,
    ) -> Result<Self> {
        let segments = segment_library(library, users, t)?;
        let servers = place_servers(&segments, &generator)?;
        let caches = place_user_caches(&segments);
        Ok(Placement {
            generator,
            servers,
            caches,
            users,
            t,
            segment_len: segments.segment_len(),
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn code_dim(&self) -> usize {
        self.generator.k()
    }

    pub fn segment_len(&self) -> usize {
        self.segment_len
    }

    pub fn subsegment_len(&self) -> usize {
        self.segment_len / self.code_dim()
    }
}

/// Shard dump keyed by (file, subset rank, server).
///
/// Layout: little-endian `u32` header fields `K, N, P, k`, then one
/// `u32`-length-prefixed payload per shard, file-major, then subset rank,
/// then server index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShardSnapshot {
    pub users: u32,
    pub files: u32,
    pub servers: u32,
    pub code_dim: u32,
    /// `[file][rank][server]`
    pub payloads: Vec<Vec<Vec<Vec<u8>>>>,
}

impl ShardSnapshot {
    pub fn from_placement(placement: &Placement) -> Self {
        let files = placement.servers.first().map_or(0, |s| s.shards.len());
        let ranks = placement.servers.first().map_or(0, |s| s.subsets.len());
        let payloads = (0..files)
            .map(|j| {
                (0..ranks)
                    .map(|r| {
                        placement
                            .servers
                            .iter()
                            .map(|s| s.shards[j][r].clone())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ShardSnapshot {
            users: placement.users as u32,
            files: files as u32,
            servers: placement.servers.len() as u32,
            code_dim: placement.code_dim() as u32,
            payloads,
        }
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        for v in [self.users, self.files, self.servers, self.code_dim] {
            w.write_all(&v.to_le_bytes())?;
        }
        for payload in self.payloads.iter().flatten().flatten() {
            w.write_all(&(payload.len() as u32).to_le_bytes())?;
            w.write_all(payload)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Reads a dump; the number of subsets per file is inferred from the
    /// payload count.
    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cursor = bytes.as_slice();
        let next_u32 = |cur: &mut &[u8]| -> Result<u32> {
            if cur.len() < 4 {
                return Err(Error::BadLength("truncated snapshot".into()));
            }
            let (head, rest) = cur.split_at(4);
            *cur = rest;
            Ok(u32::from_le_bytes(head.try_into().expect("four bytes")))
        };
        let users = next_u32(&mut cursor)?;
        let files = next_u32(&mut cursor)?;
        let servers = next_u32(&mut cursor)?;
        let code_dim = next_u32(&mut cursor)?;
        let mut flat = Vec::new();
        while !cursor.is_empty() {
            let len = next_u32(&mut cursor)? as usize;
            if cursor.len() < len {
                return Err(Error::BadLength("truncated payload".into()));
            }
            let (payload, rest) = cursor.split_at(len);
            flat.push(payload.to_vec());
            cursor = rest;
        }
        let per_rank = servers as usize;
        let per_file = per_rank * files as usize;
        if per_file == 0 || flat.len() % per_file != 0 {
            return Err(Error::BadLength(format!(
                "{} payloads do not fill {files} files x {servers} servers",
                flat.len()
            )));
        }
        let ranks = flat.len() / per_file;
        let mut it = flat.into_iter();
        let payloads = (0..files)
            .map(|_| {
                (0..ranks)
                    .map(|_| it.by_ref().take(per_rank).collect())
                    .collect()
            })
            .collect();
        Ok(ShardSnapshot {
            users,
            files,
            servers,
            code_dim,
            payloads,
        })
    }
}

/// Minimum-storage layout: every user caches the same leading fraction `mu`
/// of every file and the servers hold a (P, rho) MDS code of the rest.
#[derive(Debug, Clone)]
pub struct MinStoragePlacement {
    pub generator: GeneratorMatrix,
    users: usize,
    prefix_len: usize,
    /// `[server][file]`
    shards: Vec<Vec<Vec<u8>>>,
    /// The cached prefix of each file, identical for every user.
    prefixes: Vec<Vec<u8>>,
}

/// Byte granularity that makes both the cached prefix and the coded
/// remainder split evenly.
pub fn min_storage_granule(mu: Rational, code_dim: usize) -> usize {
    *mu.denom() as usize * code_dim
}

impl MinStoragePlacement {
    pub fn build(
        library: &FileLibrary,
        users: usize,
        mu: Rational,
        generator: GeneratorMatrix,
    ) -> Result<Self> {
        if mu < Rational::zero() || mu > Rational::one() {
            return Err(Error::BadRange(format!(
                "cached fraction {mu} outside [0, 1]"
            )));
        }
        let f = library.padded_len();
        let prefix = mu * Rational::from_integer(f as i128);
        if !prefix.is_integer() {
            return Err(Error::BadLength(format!(
                "{mu} of {f} bytes is not a whole prefix"
            )));
        }
        let prefix_len = prefix.to_integer() as usize;
        let mut shards = vec![Vec::with_capacity(library.len()); generator.n()];
        for j in 0..library.len() {
            for (p, share) in encode_segment(&library.file(j)[prefix_len..], &generator)?
                .into_iter()
                .enumerate()
            {
                shards[p].push(share);
            }
        }
        let prefixes = (0..library.len())
            .map(|j| library.file(j)[..prefix_len].to_vec())
            .collect();
        Ok(MinStoragePlacement {
            generator,
            users,
            prefix_len,
            shards,
            prefixes,
        })
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn prefix(&self, file: usize) -> &[u8] {
        &self.prefixes[file]
    }

    pub fn shard(&self, server: usize, file: usize) -> &[u8] {
        &self.shards[server][file]
    }

    pub fn server_bytes(&self, server: usize) -> usize {
        self.shards[server].iter().map(Vec::len).sum()
    }

    pub fn user_bytes(&self) -> usize {
        self.prefixes.iter().map(Vec::len).sum()
    }
}
