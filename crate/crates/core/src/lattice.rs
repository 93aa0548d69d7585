//! Rectangular lattices, couplings, subsystems and tomography colorings.
//!
//! Sites are indexed row-major from 0: `site = row * cols + col`.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest lattice a state vector is allocated for (2^25 amplitudes).
pub const MAX_SITES: usize = 25;

/// Geometry, couplings and drive coefficients of a rectangular lattice.
///
/// Couplings are in units of the reference rate J and keyed by `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    rows: usize,
    cols: usize,
    couplings: BTreeMap<(usize, usize), f64>,
    drive: Vec<Complex64>,
    detunings: Vec<f64>,
}

/// A coupling between two sites, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

impl Bond {
    /// Bitmask with both endpoint bits set.
    #[inline]
    pub fn mask(&self) -> usize {
        (1 << self.i) | (1 << self.j)
    }
}

/// Build a lattice with uniform nearest and next-nearest neighbor couplings.
///
/// NNN couplings connect every pair at Manhattan distance 2, diagonal and
/// straight. `drive` defaults to α = 1 on every site and `detunings` to zero.
pub fn build_lattice(
    rows: usize,
    cols: usize,
    j_nn: f64,
    j_nnn: f64,
    drive: Option<Vec<Complex64>>,
    detunings: Option<Vec<f64>>,
) -> Result<LatticeSpec> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidLattice("dimensions must be at least 1".into()));
    }
    let n = rows * cols;
    if n > MAX_SITES {
        return Err(Error::InvalidLattice(format!(
            "{n} sites exceeds the limit of {MAX_SITES}"
        )));
    }
    if j_nn == 0.0 || !j_nn.is_finite() || !j_nnn.is_finite() {
        return Err(Error::InvalidLattice(
            "nearest-neighbor coupling must be finite and nonzero".into(),
        ));
    }
    let drive = drive.unwrap_or_else(|| vec![Complex64::new(1.0, 0.0); n]);
    if drive.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: drive.len() });
    }
    if drive.iter().any(|a| !(a.norm() <= 1.0 + 1e-12)) {
        return Err(Error::InvalidLattice("drive amplitudes must lie in [0, 1]".into()));
    }
    let detunings = detunings.unwrap_or_else(|| vec![0.0; n]);
    if detunings.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: detunings.len() });
    }
    let mut spec = LatticeSpec { rows, cols, couplings: BTreeMap::new(), drive, detunings };
    for a in 0..n {
        for b in a + 1..n {
            let strength = match spec.distance_unchecked(a, b) {
                1 => j_nn,
                2 => j_nnn,
                _ => continue,
            };
            if strength != 0.0 {
                spec.couplings.insert((a, b), strength);
            }
        }
    }
    Ok(spec)
}

impl LatticeSpec {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Hilbert-space dimension 2^N.
    pub fn dim(&self) -> usize {
        1 << self.n_sites()
    }

    pub fn couplings(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.couplings
    }

    pub fn drive(&self) -> &[Complex64] {
        &self.drive
    }

    pub fn detunings(&self) -> &[f64] {
        &self.detunings
    }

    /// Coupling J_ij, zero if the pair is uncoupled.
    pub fn coupling(&self, a: usize, b: usize) -> f64 {
        let key = if a < b { (a, b) } else { (b, a) };
        self.couplings.get(&key).copied().unwrap_or(0.0)
    }

    /// All couplings as a flat list, in key order.
    pub fn bonds(&self) -> Vec<Bond> {
        self.couplings
            .iter()
            .map(|(&(i, j), &strength)| Bond { i, j, strength })
            .collect()
    }

    /// Nearest-neighbor grid edges, independent of coupling strengths.
    pub fn nn_edges(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let s = r * self.cols + c;
                if c + 1 < self.cols {
                    edges.push((s, s + 1));
                }
                if r + 1 < self.rows {
                    edges.push((s, s + self.cols));
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    /// Nearest-neighbor sites of `site`.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let (r, c) = self.position(site);
        let mut out = Vec::with_capacity(4);
        if r > 0 {
            out.push(site - self.cols);
        }
        if c > 0 {
            out.push(site - 1);
        }
        if c + 1 < self.cols {
            out.push(site + 1);
        }
        if r + 1 < self.rows {
            out.push(site + self.cols);
        }
        out
    }

    /// `(row, col)` of a site.
    pub fn position(&self, site: usize) -> (usize, usize) {
        (site / self.cols, site % self.cols)
    }

    pub fn check_site(&self, site: usize) -> Result<()> {
        if site < self.n_sites() {
            Ok(())
        } else {
            Err(Error::SiteOutOfRange { site, n_sites: self.n_sites() })
        }
    }

    fn distance_unchecked(&self, a: usize, b: usize) -> usize {
        let (ra, ca) = self.position(a);
        let (rb, cb) = self.position(b);
        ra.abs_diff(rb) + ca.abs_diff(cb)
    }

    /// Replace individual couplings. A zero strength removes the bond.
    pub fn with_couplings(mut self, overrides: &[(usize, usize, f64)]) -> Result<Self> {
        for &(a, b, strength) in overrides {
            self.check_site(a)?;
            self.check_site(b)?;
            if a == b {
                return Err(Error::InvalidLattice(format!("self-coupling on site {a}")));
            }
            let d = self.distance_unchecked(a, b);
            if d > 2 {
                return Err(Error::InvalidLattice(format!(
                    "coupling ({a}, {b}) spans distance {d}; at most 2 is supported"
                )));
            }
            if !strength.is_finite() {
                return Err(Error::InvalidLattice(format!("coupling ({a}, {b}) is not finite")));
            }
            let key = (a.min(b), a.max(b));
            if strength == 0.0 {
                self.couplings.remove(&key);
            } else {
                self.couplings.insert(key, strength);
            }
        }
        Ok(self)
    }

    /// Same lattice with every coupling at distance 2 removed.
    pub fn without_nnn(&self) -> Self {
        let mut out = self.clone();
        out.couplings.retain(|&(a, b), _| self.distance_unchecked(a, b) == 1);
        out
    }

    pub fn with_drive(mut self, drive: Vec<Complex64>) -> Result<Self> {
        if drive.len() != self.n_sites() {
            return Err(Error::DimensionMismatch { expected: self.n_sites(), actual: drive.len() });
        }
        self.drive = drive;
        Ok(self)
    }

    pub fn with_detunings(mut self, detunings: Vec<f64>) -> Result<Self> {
        if detunings.len() != self.n_sites() {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites(),
                actual: detunings.len(),
            });
        }
        self.detunings = detunings;
        Ok(self)
    }
}

/// Manhattan distance between two sites.
pub fn manhattan_distance(spec: &LatticeSpec, a: usize, b: usize) -> Result<usize> {
    spec.check_site(a)?;
    spec.check_site(b)?;
    Ok(spec.distance_unchecked(a, b))
}

/// Validate a site list: in range, no duplicates. Returns it sorted.
pub(crate) fn normalize_sites(n_sites: usize, sites: &[usize]) -> Result<Vec<usize>> {
    let mut sorted = sites.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateSite(w[0]));
        }
    }
    if let Some(&last) = sorted.last() {
        if last >= n_sites {
            return Err(Error::SiteOutOfRange { site: last, n_sites });
        }
    }
    Ok(sorted)
}

fn is_connected(spec: &LatticeSpec, sites: &[usize]) -> bool {
    let Some(&first) = sites.first() else {
        return false;
    };
    let members: BTreeSet<usize> = sites.iter().copied().collect();
    let mut seen = BTreeSet::from([first]);
    let mut stack = vec![first];
    while let Some(s) = stack.pop() {
        for nb in spec.neighbors(s) {
            if members.contains(&nb) && seen.insert(nb) {
                stack.push(nb);
            }
        }
    }
    seen.len() == members.len()
}

fn boundary_bonds(spec: &LatticeSpec, sites: &[usize]) -> usize {
    let mut inside = vec![false; spec.n_sites()];
    for &s in sites {
        inside[s] = true;
    }
    spec.nn_edges().iter().filter(|&&(a, b)| inside[a] != inside[b]).count()
}

/// Number of nearest-neighbor bonds with exactly one endpoint in `sites`.
pub fn subsystem_area(spec: &LatticeSpec, sites: &[usize]) -> Result<usize> {
    let sorted = normalize_sites(spec.n_sites(), sites)?;
    if !is_connected(spec, &sorted) {
        return Err(Error::Disconnected(sorted));
    }
    Ok(boundary_bonds(spec, &sorted))
}

/// A connected set of sites with its volume and boundary area.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Subsystem {
    sites: Vec<usize>,
    area: usize,
}

impl Subsystem {
    pub fn new(spec: &LatticeSpec, sites: &[usize]) -> Result<Self> {
        let sorted = normalize_sites(spec.n_sites(), sites)?;
        if !is_connected(spec, &sorted) {
            return Err(Error::Disconnected(sorted));
        }
        let area = boundary_bonds(spec, &sorted);
        Ok(Self { sites: sorted, area })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn volume(&self) -> usize {
        self.sites.len()
    }

    pub fn area(&self) -> usize {
        self.area
    }

    /// Bitmask of member sites.
    pub fn mask(&self) -> usize {
        self.sites.iter().fold(0, |m, &s| m | (1 << s))
    }

    /// Sites joined by `-`, e.g. `0-1-4`.
    pub fn label(&self) -> String {
        self.sites.iter().map(|s| s.to_string()).collect::<Vec<_>>().join("-")
    }
}

/// Assignment of measurement colors to sites; `None` marks an excluded site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TomographyColoring {
    colors: Vec<Option<usize>>,
}

impl TomographyColoring {
    pub fn new(colors: Vec<Option<usize>>) -> Self {
        Self { colors }
    }

    /// Every site its own color.
    pub fn distinct(n_sites: usize) -> Self {
        Self { colors: (0..n_sites).map(Some).collect() }
    }

    pub fn color(&self, site: usize) -> Option<usize> {
        self.colors.get(site).copied().flatten()
    }

    pub fn colors(&self) -> &[Option<usize>] {
        &self.colors
    }

    pub fn n_sites(&self) -> usize {
        self.colors.len()
    }

    /// Number of colors in use (largest index + 1).
    pub fn n_colors(&self) -> usize {
        self.colors.iter().flatten().max().map_or(0, |&c| c + 1)
    }

    pub fn excluded_sites(&self) -> Vec<usize> {
        (0..self.colors.len()).filter(|&s| self.colors[s].is_none()).collect()
    }

    /// True iff every site is measured and all colors are pairwise distinct.
    pub fn is_reconstructable(&self, sites: &[usize]) -> bool {
        let mut used = BTreeSet::new();
        sites.iter().all(|&s| match self.color(s) {
            Some(c) => used.insert(c),
            None => false,
        })
    }
}

/// All connected subsystems of volume `1..=max_volume` that the coloring can
/// reconstruct, sorted by volume and then by site list.
pub fn enumerate_subsystems(
    spec: &LatticeSpec,
    coloring: &TomographyColoring,
    max_volume: usize,
) -> Result<Vec<Subsystem>> {
    let n = spec.n_sites();
    if coloring.n_sites() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: coloring.n_sites() });
    }
    if max_volume > coloring.n_colors() {
        return Err(Error::InvalidArgument(format!(
            "max_volume {max_volume} exceeds the {} available colors",
            coloring.n_colors()
        )));
    }
    // Grow connected sets one neighbor at a time; masks deduplicate.
    let mut found: BTreeSet<u32> = BTreeSet::new();
    let mut layer: BTreeSet<u32> = (0..n)
        .filter(|&s| coloring.color(s).is_some())
        .map(|s| 1u32 << s)
        .collect();
    for _ in 0..max_volume {
        found.extend(layer.iter().copied());
        let mut next = BTreeSet::new();
        for &mask in &layer {
            let members: Vec<usize> = (0..n).filter(|&s| mask >> s & 1 == 1).collect();
            for &s in &members {
                for nb in spec.neighbors(s) {
                    if mask >> nb & 1 == 1 {
                        continue;
                    }
                    let mut cand = members.clone();
                    cand.push(nb);
                    if coloring.is_reconstructable(&cand) {
                        next.insert(mask | 1 << nb);
                    }
                }
            }
        }
        layer = next;
    }
    let mut out: Vec<Subsystem> = found
        .into_iter()
        .map(|mask| {
            let sites: Vec<usize> = (0..n).filter(|&s| mask >> s & 1 == 1).collect();
            let area = boundary_bonds(spec, &sites);
            Subsystem { sites, area }
        })
        .collect();
    out.sort_by(|a, b| a.volume().cmp(&b.volume()).then_with(|| a.sites.cmp(&b.sites)));
    Ok(out)
}
