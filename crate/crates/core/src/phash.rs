//! 192-bit perceptual fingerprints (one 64-bit difference hash per channel),
//! Hamming distances and threshold clustering.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::codec::BehaviorImage;
use crate::error::{Error, Result};

const HASH_COLS: usize = 9;
const HASH_ROWS: usize = 8;
pub const HASH_BITS: u32 = 192;
pub const DEFAULT_CUTOFF: u32 = 74;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelOrder {
    #[default]
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Downscale {
    /// Exact area-weighted box averaging.
    #[default]
    Area,
}

/// Hash settings recorded in the manifest; hashes only compare under equal
/// settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HashConfig {
    pub channel_order: ChannelOrder,
    pub downscale: Downscale,
}

/// Box sums of the 9x8 downscale, scaled by a common factor.
///
/// Axis coordinates are multiplied by the output size so every box boundary
/// lands on an integer and all boxes share the same area.
fn area_sums(plane: &[u8], side: usize) -> [[u64; HASH_COLS]; HASH_ROWS] {
    let mut sums = [[0u64; HASH_COLS]; HASH_ROWS];
    let overlap = |cell: usize, pixel: usize, cells: usize| -> u64 {
        let (c0, c1) = (cell * side, (cell + 1) * side);
        let (p0, p1) = (pixel * cells, (pixel + 1) * cells);
        c1.min(p1).saturating_sub(c0.max(p0)) as u64
    };
    for (r, row) in sums.iter_mut().enumerate() {
        let ys = (r * side / HASH_ROWS)..((r + 1) * side).div_ceil(HASH_ROWS);
        for (c, cell) in row.iter_mut().enumerate() {
            let xs = (c * side / HASH_COLS)..((c + 1) * side).div_ceil(HASH_COLS);
            for y in ys.clone() {
                let wy = overlap(r, y, HASH_ROWS);
                for x in xs.clone() {
                    *cell += u64::from(plane[y * side + x]) * wy * overlap(c, x, HASH_COLS);
                }
            }
        }
    }
    sums
}

/// 64-bit difference hash of one plane: bit `(r, c)` is set when the
/// downscaled pixel is brighter than its right neighbour. Row-major, MSB
/// first.
pub fn dhash_channel(plane: &[u8], side: usize) -> u64 {
    assert!(side >= 2, "dHash needs at least a 2x2 plane");
    assert_eq!(plane.len(), side * side, "plane is not {side}x{side}");
    let sums = area_sums(plane, side);
    let mut bits = 0u64;
    for row in &sums {
        for c in 0..HASH_COLS - 1 {
            bits = (bits << 1) | u64::from(row[c] > row[c + 1]);
        }
    }
    bits
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PerceptualHash {
    /// Per-channel hashes in R, G, B order.
    pub bits: [u64; 3],
    pub source_id: String,
}

impl PerceptualHash {
    pub fn of_image(image: &BehaviorImage, source_id: impl Into<String>) -> Self {
        let side = image.side();
        let bits = Channel::ALL.map(|ch| dhash_channel(&image.plane(ch), side));
        PerceptualHash {
            bits,
            source_id: source_id.into(),
        }
    }

    pub fn to_hex(&self) -> String {
        format!(
            "{:016x}{:016x}{:016x}",
            self.bits[0], self.bits[1], self.bits[2]
        )
    }

    pub fn from_hex(hex: &str, source_id: impl Into<String>) -> Result<Self> {
        if hex.len() != 48 || !hex.is_ascii() {
            return Err(Error::Image(format!("`{hex}` is not a 48-digit hash")));
        }
        let mut bits = [0u64; 3];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = u64::from_str_radix(&hex[i * 16..(i + 1) * 16], 16)
                .map_err(|e| Error::Image(format!("bad hash `{hex}`: {e}")))?;
        }
        Ok(PerceptualHash {
            bits,
            source_id: source_id.into(),
        })
    }
}

impl fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

pub fn hash192(image: &BehaviorImage, source_id: impl Into<String>) -> PerceptualHash {
    PerceptualHash::of_image(image, source_id)
}

pub fn hamming(a: &PerceptualHash, b: &PerceptualHash) -> u32 {
    a.bits
        .iter()
        .zip(&b.bits)
        .map(|(x, y)| (x ^ y).count_ones())
        .sum()
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryPartition {
    pub cutoff: u32,
    /// Groups of input indices, each ascending, ordered by smallest member.
    pub groups: Vec<Vec<usize>>,
}

impl CategoryPartition {
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Groups as source ids.
    pub fn named<'a>(&self, hashes: &'a [PerceptualHash]) -> Vec<Vec<&'a str>> {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&i| hashes[i].source_id.as_str()).collect())
            .collect()
    }
}

/// Single-linkage components of the graph joining hashes within `cutoff`.
pub fn cluster(hashes: &[PerceptualHash], cutoff: u32) -> CategoryPartition {
    let mut sets = DisjointSet::new(hashes.len());
    for i in 0..hashes.len() {
        for j in (i + 1)..hashes.len() {
            if hamming(&hashes[i], &hashes[j]) <= cutoff {
                sets.union(i, j);
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..hashes.len() {
        by_root.entry(sets.find(i)).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = by_root.into_values().collect();
    groups.sort_by_key(|g| g[0]);
    CategoryPartition { cutoff, groups }
}

pub fn distance_matrix(hashes: &[PerceptualHash]) -> Vec<Vec<u32>> {
    hashes
        .iter()
        .map(|a| hashes.iter().map(|b| hamming(a, b)).collect())
        .collect()
}

/// Pairwise distance counts, split by whether the pair shares a category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceHistogram {
    pub all: Vec<u64>,
    pub same: Vec<u64>,
    pub different: Vec<u64>,
}

pub fn distance_histogram(
    hashes: &[PerceptualHash],
    categories: &BTreeMap<String, String>,
) -> DistanceHistogram {
    let bins = HASH_BITS as usize + 1;
    let mut hist = DistanceHistogram {
        all: vec![0; bins],
        same: vec![0; bins],
        different: vec![0; bins],
    };
    for i in 0..hashes.len() {
        for j in (i + 1)..hashes.len() {
            let d = hamming(&hashes[i], &hashes[j]) as usize;
            hist.all[d] += 1;
            let ci = categories.get(&hashes[i].source_id);
            let cj = categories.get(&hashes[j].source_id);
            if let (Some(ci), Some(cj)) = (ci, cj) {
                if ci == cj {
                    hist.same[d] += 1;
                } else {
                    hist.different[d] += 1;
                }
            }
        }
    }
    hist
}
