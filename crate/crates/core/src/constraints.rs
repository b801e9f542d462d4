//! Pairwise must-link / cannot-link constraint sets: validation, balanced
//! and imbalanced sampling protocols, and CSV persistence.
//!
//! Constraints reference instances by index, never by feature value, so the
//! same file stays valid across feature preprocessing. Pairs are stored with
//! `a < b`; a set rejects duplicate pairs and pairs asserted with both link
//! flags. Transitive consistency is deliberately *not* enforced.

use crate::error::{Error, Result};
use crate::stream::substream;
use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

/// One pairwise supervision item: instances `a` and `b` are in the same
/// cluster (`y = 1`) or in different clusters (`y = 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Constraint {
    pub a: usize,
    pub b: usize,
    pub y: u8,
}

/// A validated collection of constraints over a dataset of `n_instances`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintSet {
    items: Vec<Constraint>,
    n_instances: usize,
}

impl ConstraintSet {
    /// Canonicalizes (`a < b`) and validates: indices in bounds, no self
    /// pairs, no duplicate pairs, no pair asserted both ways.
    pub fn new(items: Vec<Constraint>, n_instances: usize) -> Result<Self> {
        let mut seen: std::collections::HashMap<(usize, usize), u8> =
            std::collections::HashMap::with_capacity(items.len());
        let mut canonical = Vec::with_capacity(items.len());
        for c in items {
            if c.a == c.b {
                return Err(Error::SelfPair { index: c.a });
            }
            for idx in [c.a, c.b] {
                if idx >= n_instances {
                    return Err(Error::IndexOutOfBounds { index: idx, len: n_instances });
                }
            }
            if c.y > 1 {
                return Err(Error::InvalidParameter {
                    what: format!("link flag must be 0 or 1, got {}", c.y),
                });
            }
            let (a, b) = if c.a < c.b { (c.a, c.b) } else { (c.b, c.a) };
            match seen.insert((a, b), c.y) {
                None => canonical.push(Constraint { a, b, y: c.y }),
                Some(prev) if prev == c.y => return Err(Error::DuplicatePair { a, b }),
                Some(_) => return Err(Error::ContradictoryPair { a, b }),
            }
        }
        Ok(Self { items: canonical, n_instances })
    }

    pub fn items(&self) -> &[Constraint] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn n_instances(&self) -> usize {
        self.n_instances
    }

    pub fn n_positive(&self) -> usize {
        self.items.iter().filter(|c| c.y == 1).count()
    }

    pub fn n_negative(&self) -> usize {
        self.items.iter().filter(|c| c.y == 0).count()
    }

    /// The cannot-link subset, in stored order.
    pub fn negatives(&self) -> impl Iterator<Item = &Constraint> {
        self.items.iter().filter(|c| c.y == 0)
    }

    fn pair_set(&self) -> HashSet<(usize, usize)> {
        self.items.iter().map(|c| (c.a, c.b)).collect()
    }

    /// True when every constraint of `self` appears in `other` with the same
    /// link flag.
    pub fn is_subset_of(&self, other: &ConstraintSet) -> bool {
        let theirs: HashSet<Constraint> = other.items.iter().copied().collect();
        self.items.iter().all(|c| theirs.contains(c))
    }

    /// Writes `a,b,y` rows (with header) in stored order.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["a", "b", "y"])?;
        for c in &self.items {
            w.write_record([c.a.to_string(), c.b.to_string(), c.y.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads an `a,b,y` CSV written by [`ConstraintSet::save_csv`] and
    /// validates it against a dataset of `n_instances`.
    pub fn load_csv(path: &Path, n_instances: usize) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut items = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let line = i + 2; // header is line 1
            if rec.len() != 3 {
                return Err(Error::Parse { line, msg: format!("expected 3 fields, got {}", rec.len()) });
            }
            let field = |j: usize, name: &str| -> Result<usize> {
                rec[j].trim().parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad {name}: {:?}", &rec[j]),
                })
            };
            let a = field(0, "index a")?;
            let b = field(1, "index b")?;
            let y = field(2, "link flag")?;
            if y > 1 {
                return Err(Error::Parse { line, msg: format!("link flag must be 0 or 1, got {y}") });
            }
            items.push(Constraint { a, b, y: y as u8 });
        }
        Self::new(items, n_instances)
    }
}

/// Total number of unordered pairs over `n` instances.
fn total_pairs(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Draws `m` unordered pairs uniformly without replacement from the indicated
/// pair space. `enumerate` lists the space; `draw` samples one member.
/// Enumeration + partial shuffle when the space is small (or mostly needed),
/// rejection with a dedup set otherwise.
fn sample_pairs<R, E, D>(
    m: usize,
    space_size: usize,
    rng: &mut R,
    enumerate: E,
    mut draw: D,
) -> Vec<(usize, usize)>
where
    R: Rng,
    E: FnOnce() -> Vec<(usize, usize)>,
    D: FnMut(&mut R) -> Option<(usize, usize)>,
{
    const ENUMERATE_CAP: usize = 4_000_000;
    if space_size <= ENUMERATE_CAP || 2 * m >= space_size {
        let mut pairs = enumerate();
        debug_assert_eq!(pairs.len(), space_size);
        for i in 0..m {
            let j = rng.random_range(i..pairs.len());
            pairs.swap(i, j);
        }
        pairs.truncate(m);
        pairs
    } else {
        let mut seen = HashSet::with_capacity(m * 2);
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            if let Some(p) = draw(rng) {
                if seen.insert(p) {
                    out.push(p);
                }
            }
        }
        out
    }
}

/// Samples `m` distinct unordered pairs uniformly at random and labels each
/// from ground truth: `y = 1` iff the two instances share a label.
///
/// Deterministic given `(labels, m, seed)`.
pub fn sample_balanced(labels: &[usize], m: usize, seed: u64) -> Result<ConstraintSet> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::InvalidParameter {
            what: format!("need at least 2 instances to form pairs, got {n}"),
        });
    }
    if m < 1 {
        return Err(Error::InvalidParameter { what: "need at least one constraint".into() });
    }
    let total = total_pairs(n);
    if m > total {
        return Err(Error::TooManyConstraints { requested: m, available: total });
    }
    let mut rng = substream(seed, "constraints/balanced");
    let pairs = sample_pairs(
        m,
        total,
        &mut rng,
        || {
            let mut all = Vec::with_capacity(total);
            for a in 0..n {
                for b in a + 1..n {
                    all.push((a, b));
                }
            }
            all
        },
        |rng| {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                None
            } else {
                Some((i.min(j), i.max(j)))
            }
        },
    );
    let items = pairs
        .into_iter()
        .map(|(a, b)| Constraint { a, b, y: (labels[a] == labels[b]) as u8 })
        .collect();
    ConstraintSet::new(items, n)
}

/// Three nested constraint sets exercising cluster-size imbalance in the
/// supervision: the base set plus two successively larger waves of negative
/// constraints that all touch one designated cluster.
#[derive(Debug, Clone)]
pub struct ImbGroup {
    pub imb0: ConstraintSet,
    pub imb1: ConstraintSet,
    pub imb2: ConstraintSet,
    pub imb_cluster: usize,
    pub seed: u64,
}

/// Extends `base` with `extra` negative constraints, each pairing a member of
/// `imb_cluster` with a non-member, distinct from everything already present.
fn add_cross_negatives(
    base: &ConstraintSet,
    labels: &[usize],
    imb_cluster: usize,
    extra: usize,
    rng: &mut impl Rng,
) -> Result<ConstraintSet> {
    let members: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] == imb_cluster).collect();
    let others: Vec<usize> =
        (0..labels.len()).filter(|&i| labels[i] != imb_cluster).collect();
    let existing = base.pair_set();
    let cross_total = members.len() * others.len();
    let already_cross = existing
        .iter()
        .filter(|&&(a, b)| (labels[a] == imb_cluster) != (labels[b] == imb_cluster))
        .count();
    let available = cross_total - already_cross;
    if extra > available {
        return Err(Error::InsufficientCrossPairs { needed: extra, available });
    }
    let pairs = sample_pairs(
        extra,
        available,
        rng,
        || {
            let mut all = Vec::with_capacity(available);
            for &u in &members {
                for &v in &others {
                    let p = (u.min(v), u.max(v));
                    if !existing.contains(&p) {
                        all.push(p);
                    }
                }
            }
            all
        },
        |rng| {
            let u = members[rng.random_range(0..members.len())];
            let v = others[rng.random_range(0..others.len())];
            let p = (u.min(v), u.max(v));
            if existing.contains(&p) {
                None
            } else {
                Some(p)
            }
        },
    );
    let mut items = base.items().to_vec();
    items.extend(pairs.into_iter().map(|(a, b)| Constraint { a, b, y: 0 }));
    ConstraintSet::new(items, labels.len())
}

/// Builds nested sets `imb0 ⊆ imb1 ⊆ imb2` of the given sizes. The base set
/// is a balanced sample; each extension adds only negative constraints that
/// touch `imb_cluster`, skewing the supervision against that cluster.
pub fn sample_imbalanced(
    labels: &[usize],
    sizes: (usize, usize, usize),
    imb_cluster: usize,
    seed: u64,
) -> Result<ImbGroup> {
    let (m0, m1, m2) = sizes;
    if !(m0 < m1 && m1 < m2) {
        return Err(Error::InvalidParameter {
            what: format!("sizes must be strictly increasing, got ({m0}, {m1}, {m2})"),
        });
    }
    if !labels.contains(&imb_cluster) {
        return Err(Error::InvalidParameter {
            what: format!("cluster {imb_cluster} not present in labels"),
        });
    }
    let imb0 = sample_balanced(labels, m0, seed)?;
    let mut rng1 = substream(seed, "constraints/imb-extra1");
    let imb1 = add_cross_negatives(&imb0, labels, imb_cluster, m1 - m0, &mut rng1)?;
    let mut rng2 = substream(seed, "constraints/imb-extra2");
    let imb2 = add_cross_negatives(&imb1, labels, imb_cluster, m2 - m1, &mut rng2)?;
    Ok(ImbGroup { imb0, imb1, imb2, imb_cluster, seed })
}

#[derive(Debug, Serialize, Deserialize)]
struct ImbManifest {
    imb_cluster: usize,
    seed: u64,
    files: [String; 3],
}

impl ImbGroup {
    /// Writes `{stem}0.csv`, `{stem}1.csv`, `{stem}2.csv` and a
    /// `{stem}-manifest.json` recording the targeted cluster and seed.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        let files = [format!("{stem}0.csv"), format!("{stem}1.csv"), format!("{stem}2.csv")];
        for (set, name) in [&self.imb0, &self.imb1, &self.imb2].into_iter().zip(&files) {
            set.save_csv(&dir.join(name))?;
        }
        let manifest = ImbManifest { imb_cluster: self.imb_cluster, seed: self.seed, files };
        let json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dir.join(format!("{stem}-manifest.json")), json + "\n")?;
        Ok(())
    }

    /// Reads back a group written by [`ImbGroup::save`].
    pub fn load(dir: &Path, stem: &str, n_instances: usize) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(format!("{stem}-manifest.json")))?;
        let manifest: ImbManifest = serde_json::from_str(&text)?;
        let mut sets = manifest
            .files
            .iter()
            .map(|name| ConstraintSet::load_csv(&dir.join(name), n_instances));
        let imb0 = sets.next().unwrap()?;
        let imb1 = sets.next().unwrap()?;
        let imb2 = sets.next().unwrap()?;
        Ok(Self { imb0, imb1, imb2, imb_cluster: manifest.imb_cluster, seed: manifest.seed })
    }
}

/// Fraction of constraints falling on each ordered cluster pair, as a
/// symmetric `K x K` matrix summing to 1. Cross-cluster constraints split
/// their mass evenly between the two mirrored entries.
pub fn constraint_heatmap(cs: &ConstraintSet, labels: &[usize]) -> Result<Array2<f64>> {
    if cs.is_empty() {
        return Err(Error::EmptyInput { what: "constraint set" });
    }
    if labels.len() != cs.n_instances() {
        return Err(Error::LengthMismatch { left: labels.len(), right: cs.n_instances() });
    }
    let k = labels.iter().max().copied().unwrap_or(0) + 1;
    let mut heat = Array2::<f64>::zeros((k, k));
    let w = 1.0 / cs.len() as f64;
    for c in cs.items() {
        let (la, lb) = (labels[c.a], labels[c.b]);
        heat[[la, lb]] += 0.5 * w;
        heat[[lb, la]] += 0.5 * w;
    }
    Ok(heat)
}
