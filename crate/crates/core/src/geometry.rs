//! Random recursive laminations of the closed disk by inscribed `k`-gons.
//!
//! Points of the unit circle are fractions of a full turn in `[0, 1)`. The live
//! fragments partition the circle into arcs; the partition is kept in an
//! ordered map keyed by arc start, so locating the fragment that owns a circle
//! point is a predecessor query. A thrown polygon is accepted exactly when all
//! of its vertices land on the boundary of one fragment: fragments are convex,
//! so the polygon then sits inside that fragment, and otherwise one of its
//! edges must cross a chord.
//!
//! Children of a split are numbered by a uniformly random permutation of the
//! `k` gaps between consecutive vertices. For `k = 2` this is the usual fair
//! coin for which child comes first; for larger `k` it is a convention chosen
//! to keep the children exchangeable.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::branching::Label;
use crate::rng::{self, ChaCha8Rng, Seed};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate configuration: point {0} appears twice")]
    DuplicatePoint(f64),
    #[error("point {0} coincides with an existing split point")]
    OnSplitPoint(f64),
    #[error("point {0} is outside [0, 1)")]
    OutOfRange(f64),
    #[error("polygon needs {expected} vertices, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("polygon arity must be between 2 and 255, got {0}")]
    BadArity(usize),
}

/// A point of the unit circle, as a fraction of a turn.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
pub struct CirclePoint(f64);

impl CirclePoint {
    pub fn new(position: f64) -> Result<Self, GeometryError> {
        if (0.0..1.0).contains(&position) {
            Ok(Self(position))
        } else {
            Err(GeometryError::OutOfRange(position))
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self(rng.random::<f64>())
    }

    pub fn position(self) -> f64 {
        self.0
    }

    /// Cartesian coordinates on the unit circle.
    pub fn xy(self) -> (f64, f64) {
        let t = std::f64::consts::TAU * self.0;
        (t.cos(), t.sin())
    }

    fn key(self) -> u64 {
        // non-negative floats order like their bit patterns
        self.0.to_bits()
    }
}

/// Counterclockwise distance from `from` to `to`, in `[0, 1)`.
fn ccw(from: f64, to: f64) -> f64 {
    let d = to - from;
    if d < 0.0 {
        d + 1.0
    } else {
        d
    }
}

pub type FragmentId = usize;

/// Counterclockwise arc of the circle from `start` to `end`.
///
/// An arc with `start == end` is the full circle (only the root has one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Arc {
    pub start: CirclePoint,
    pub end: CirclePoint,
    pub owner: FragmentId,
}

impl Arc {
    pub fn length(&self) -> f64 {
        if self.start == self.end {
            1.0
        } else {
            ccw(self.start.0, self.end.0)
        }
    }

    fn offset_of(&self, p: f64) -> f64 {
        ccw(self.start.0, p)
    }
}

/// A fragment ever created by the construction (live or already split).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fragment {
    pub id: FragmentId,
    /// Boundary arcs in counterclockwise order.
    pub arcs: Vec<Arc>,
    /// Number of ends; 0 for the root by convention.
    pub ends: usize,
    /// Address in the k-ary tree, one digit per generation.
    pub address: Vec<u8>,
    pub label: Label,
    pub parent: Option<FragmentId>,
    pub children: Vec<FragmentId>,
    /// 1-based throw that created the fragment; 0 for the root.
    pub born_at: u64,
}

impl Fragment {
    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    pub fn is_live(&self) -> bool {
        self.children.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.address.len()
    }
}

/// Result of throwing one polygon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SplitOutcome {
    Split(Split),
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Split {
    pub parent: FragmentId,
    pub parent_label: Label,
    /// New fragments in child-slot order.
    pub children: Vec<FragmentId>,
    /// Child labels `1 + m_i`, in child-slot order.
    pub labels: Vec<Label>,
}

impl Split {
    /// The composition `(m_1, ..., m_k)` of the parent label.
    pub fn composition(&self) -> Vec<Label> {
        self.labels.iter().map(|l| l - 1).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThrowRecord {
    Accepted { parent: FragmentId },
    Rejected,
}

#[derive(Debug, Clone, Copy)]
struct ArcEntry {
    end: f64,
    owner: FragmentId,
}

/// The lamination `L^k_n` together with the full genealogy of its fragments.
#[derive(Debug, Clone)]
pub struct Lamination {
    k: usize,
    seed: Seed,
    rng: ChaCha8Rng,
    fragments: Vec<Fragment>,
    /// Circle partition keyed by arc start; empty while only the root exists.
    arcs: BTreeMap<u64, ArcEntry>,
    polygons: Vec<Vec<CirclePoint>>,
    log: Vec<ThrowRecord>,
    collisions: u64,
}

pub const ROOT: FragmentId = 0;
pub const MAX_ARITY: usize = u8::MAX as usize;

impl Lamination {
    pub fn new(k: usize, seed: Seed) -> Result<Self, GeometryError> {
        Self::with_rng(k, seed, rng::seeded(seed))
    }

    /// A lamination driven by replica `stream` of `master`.
    pub fn from_stream(k: usize, master: Seed, stream: u64) -> Result<Self, GeometryError> {
        Self::with_rng(k, master, rng::stream(master, stream))
    }

    fn with_rng(k: usize, seed: Seed, rng: ChaCha8Rng) -> Result<Self, GeometryError> {
        if !(2..=MAX_ARITY).contains(&k) {
            return Err(GeometryError::BadArity(k));
        }
        let root = Fragment {
            id: ROOT,
            arcs: vec![Arc {
                start: CirclePoint(0.0),
                end: CirclePoint(0.0),
                owner: ROOT,
            }],
            ends: 0,
            address: Vec::new(),
            label: 0,
            parent: None,
            children: Vec::new(),
            born_at: 0,
        };
        Ok(Self {
            k,
            seed,
            rng,
            fragments: vec![root],
            arcs: BTreeMap::new(),
            polygons: Vec::new(),
            log: Vec::new(),
            collisions: 0,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    pub fn throws(&self) -> u64 {
        self.log.len() as u64
    }

    pub fn accepted(&self) -> u64 {
        self.polygons.len() as u64
    }

    /// Resampled vertex sets (exact point collisions).
    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn log(&self) -> &[ThrowRecord] {
        &self.log
    }

    /// Accepted polygons, vertices in counterclockwise order.
    pub fn polygons(&self) -> &[Vec<CirclePoint>] {
        &self.polygons
    }

    /// Every fragment ever created, indexed by id.
    pub fn fragments(&self) -> &[Fragment] {
        &self.fragments
    }

    pub fn fragment(&self, id: FragmentId) -> &Fragment {
        &self.fragments[id]
    }

    pub fn live_fragments(&self) -> impl Iterator<Item = &Fragment> {
        self.fragments.iter().filter(|f| f.is_live())
    }

    /// Live fragment whose boundary contains `p`.
    pub fn locate(&self, p: CirclePoint) -> Result<FragmentId, GeometryError> {
        Ok(self.locate_arc(p)?.1)
    }

    /// `(start key, owner)` of the arc containing `p`.
    fn locate_arc(&self, p: CirclePoint) -> Result<(u64, FragmentId), GeometryError> {
        if self.arcs.is_empty() {
            return Ok((0, ROOT));
        }
        let key = p.key();
        let (start, entry) = self
            .arcs
            .range(..=key)
            .next_back()
            .or_else(|| self.arcs.iter().next_back())
            .expect("non-empty partition");
        if *start == key {
            return Err(GeometryError::OnSplitPoint(p.0));
        }
        Ok((*start, entry.owner))
    }

    /// Throws the polygon with vertices `pts`.
    pub fn throw_polygon(&mut self, pts: &[CirclePoint]) -> Result<SplitOutcome, GeometryError> {
        if pts.len() != self.k {
            return Err(GeometryError::WrongArity {
                expected: self.k,
                got: pts.len(),
            });
        }
        let mut sorted = pts.to_vec();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GeometryError::DuplicatePoint(w[0].0));
        }
        let mut owner = None;
        let mut same = true;
        for &p in &sorted {
            let id = self.locate(p)?;
            match owner {
                None => owner = Some(id),
                Some(o) if o != id => same = false,
                _ => {}
            }
        }
        if !same {
            self.log.push(ThrowRecord::Rejected);
            return Ok(SplitOutcome::Rejected);
        }
        let parent = owner.expect("k >= 2 points");
        let split = self.split(parent, &sorted);
        self.log.push(ThrowRecord::Accepted { parent });
        self.polygons.push(sorted);
        Ok(SplitOutcome::Split(split))
    }

    /// Draws `k` uniform points and throws them; exact collisions are redrawn.
    pub fn throw_random(&mut self) -> SplitOutcome {
        loop {
            let pts: Vec<CirclePoint> = (0..self.k).map(|_| CirclePoint::random(&mut self.rng)).collect();
            match self.throw_polygon(&pts) {
                Ok(outcome) => return outcome,
                Err(_) => self.collisions += 1,
            }
        }
    }

    fn split(&mut self, parent: FragmentId, sorted: &[CirclePoint]) -> Split {
        let k = self.k;
        let frag = &self.fragments[parent];
        let parent_label = frag.label;
        let is_root = frag.is_root();
        let parent_arcs = frag.arcs.clone();
        let m = parent_arcs.len();

        // Each vertex as (arc index, offset in arc), then in boundary order.
        let mut placed: Vec<(usize, f64, CirclePoint)> = sorted
            .iter()
            .map(|&p| {
                let j = if is_root {
                    0
                } else {
                    parent_arcs
                        .iter()
                        .position(|a| a.start.key() == self.locate_arc(p).expect("located").0)
                        .expect("arc of parent")
                };
                (j, parent_arcs[j].offset_of(p.0), p)
            })
            .collect();
        placed.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));

        // Arc pieces strictly between consecutive vertices.
        let mut gaps: Vec<Vec<(CirclePoint, CirclePoint)>> = Vec::with_capacity(k);
        for i in 0..k {
            let (j0, _, p0) = placed[i];
            let (j1, _, p1) = placed[(i + 1) % k];
            let wraps = i + 1 == k;
            let mut pieces = Vec::new();
            if is_root || (j0 == j1 && !wraps) {
                pieces.push((p0, p1));
            } else {
                let steps = if wraps {
                    match (j1 + m - j0) % m {
                        0 => m,
                        s => s,
                    }
                } else {
                    j1 - j0
                };
                pieces.push((p0, parent_arcs[j0].end));
                for s in 1..steps {
                    let a = &parent_arcs[(j0 + s) % m];
                    pieces.push((a.start, a.end));
                }
                pieces.push((parent_arcs[j1].start, p1));
            }
            gaps.push(pieces);
        }

        let mut slots: Vec<usize> = (0..k).collect();
        slots.shuffle(&mut self.rng);

        let born_at = self.log.len() as u64 + 1;
        let base = self.fragments.len();
        let parent_address = self.fragments[parent].address.clone();
        let mut children = vec![0; k];
        let mut labels = vec![0; k];
        let mut new_frags: Vec<Option<Fragment>> = vec![None; k];
        for (gap, pieces) in gaps.into_iter().enumerate() {
            let slot = slots[gap];
            let id = base + slot;
            let arcs: Vec<Arc> = pieces
                .into_iter()
                .map(|(start, end)| Arc {
                    start,
                    end,
                    owner: id,
                })
                .collect();
            let mut address = parent_address.clone();
            address.push(slot as u8);
            let ends = arcs.len();
            children[slot] = id;
            labels[slot] = ends as Label;
            new_frags[slot] = Some(Fragment {
                id,
                arcs,
                ends,
                address,
                label: ends as Label,
                parent: Some(parent),
                children: Vec::new(),
                born_at,
            });
        }

        if !is_root {
            for a in &parent_arcs {
                self.arcs.remove(&a.start.key());
            }
        }
        for f in new_frags.into_iter().map(|f| f.expect("every slot filled")) {
            for a in &f.arcs {
                self.arcs.insert(
                    a.start.key(),
                    ArcEntry {
                        end: a.end.0,
                        owner: a.owner,
                    },
                );
            }
            self.fragments.push(f);
        }
        self.fragments[parent].children = children.clone();

        Split {
            parent,
            parent_label,
            children,
            labels,
        }
    }

    /// Arcs of the circle partition in increasing start order.
    pub fn partition(&self) -> Vec<Arc> {
        if self.arcs.is_empty() {
            return self.fragments[ROOT].arcs.clone();
        }
        self.arcs
            .iter()
            .map(|(&s, e)| Arc {
                start: CirclePoint(f64::from_bits(s)),
                end: CirclePoint(e.end),
                owner: e.owner,
            })
            .collect()
    }

    /// Genealogy as `address<TAB>label<TAB>throwIndex` lines, depth-first and
    /// lexicographic. The root's address is `-`; child indices are single digits
    /// for `k <= 10` and dot-separated otherwise.
    pub fn genealogy_text(&self) -> String {
        let mut out = String::new();
        let mut stack = vec![ROOT];
        while let Some(id) = stack.pop() {
            let f = &self.fragments[id];
            let address: String = if f.address.is_empty() {
                "-".to_string()
            } else if self.k <= 10 {
                f.address.iter().map(|&d| char::from(b'0' + d)).collect()
            } else {
                let parts: Vec<String> = f.address.iter().map(u8::to_string).collect();
                parts.join(".")
            };
            writeln!(out, "{address}\t{}\t{}", f.label, f.born_at).expect("write to string");
            stack.extend(f.children.iter().rev());
        }
        out
    }

    pub fn max_depth(&self) -> usize {
        self.fragments.iter().map(Fragment::depth).max().unwrap_or(0)
    }

    /// Count of fragments ever created, by label.
    pub fn label_histogram(&self) -> BTreeMap<Label, usize> {
        let mut h = BTreeMap::new();
        for f in &self.fragments {
            *h.entry(f.label).or_insert(0) += 1;
        }
        h
    }
}

/// Builds `L^k_throws`; a deterministic function of `(k, throws, seed)`.
pub fn run_construction(k: usize, throws: u64, seed: Seed) -> Result<Lamination, GeometryError> {
    let mut lam = Lamination::new(k, seed)?;
    for _ in 0..throws {
        lam.throw_random();
    }
    Ok(lam)
}

/// Whether the inscribed polygons with vertex sets `a` and `b` are disjoint.
///
/// Two inscribed convex polygons are disjoint exactly when the vertices of `b`
/// all fall in one circular gap between consecutive vertices of `a`.
pub fn polygons_disjoint(a: &[CirclePoint], b: &[CirclePoint]) -> Result<bool, GeometryError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(GeometryError::BadArity(a.len().min(b.len())));
    }
    let mut sa: Vec<f64> = a.iter().map(|p| p.0).collect();
    sa.sort_by(f64::total_cmp);
    let mut gap = None;
    for p in b {
        let idx = sa.partition_point(|&x| x < p.0);
        if sa.get(idx) == Some(&p.0) {
            return Err(GeometryError::DuplicatePoint(p.0));
        }
        // gaps 0 and len are the same wrapped gap
        let g = idx % sa.len();
        match gap {
            None => gap = Some(g),
            Some(h) if h != g => return Ok(false),
            _ => {}
        }
    }
    Ok(true)
}
