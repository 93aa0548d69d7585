//! Block diagonalization of sector Hamiltonians by lattice reflections.
//!
//! The reflections that leave all couplings and site detunings unchanged form
//! an abelian group of involutions G ⊆ {e, row flip, column flip, both}. Each
//! sector splits into one block per character χ: G → {±1}. Block basis vectors
//! are symmetrized orbits |r̃⟩ = |O_r|^{-1/2} Σ_{s∈O_r} χ(g_s)|s⟩ over orbit
//! representatives r whose stabilizer lies in ker χ.

use crate::error::Result;
use crate::hamiltonian::{fock_energy, symmetric_eigenvalues, SectorBasis};
use crate::lattice::LatticeSpec;
use crate::parallel;

/// Site permutations of the reflection group preserved by `spec`, identity first.
pub(crate) fn reflection_group(spec: &LatticeSpec) -> Vec<Vec<usize>> {
    let (rows, cols) = (spec.rows(), spec.cols());
    let flip = |fr: bool, fc: bool| -> Vec<usize> {
        (0..rows * cols)
            .map(|s| {
                let (r, c) = spec.position(s);
                let r2 = if fr { rows - 1 - r } else { r };
                let c2 = if fc { cols - 1 - c } else { c };
                r2 * cols + c2
            })
            .collect()
    };
    let preserves = |p: &Vec<usize>| {
        spec.couplings().iter().all(|(&(a, b), &j)| spec.coupling(p[a], p[b]) == j)
            && (0..p.len()).all(|s| spec.detunings()[p[s]] == spec.detunings()[s])
    };
    let mut group: Vec<Vec<usize>> = Vec::new();
    for (fr, fc) in [(false, false), (true, false), (false, true), (true, true)] {
        let p = flip(fr, fc);
        if preserves(&p) && !group.contains(&p) {
            group.push(p);
        }
    }
    group
}

#[inline]
fn permute(perm: &[usize], state: usize) -> usize {
    let mut out = 0;
    let mut bits = state;
    while bits != 0 {
        out |= 1 << perm[bits.trailing_zeros() as usize];
        bits &= bits - 1;
    }
    out
}

/// Characters of an abelian group of involutions given as a list of
/// elements. Returns one ±1 vector per character.
fn characters(group: &[Vec<usize>]) -> Vec<Vec<f64>> {
    let g = group.len();
    // Index products so χ(a)χ(b) = χ(ab) can be checked.
    let n_sites = group[0].len();
    let product = |a: usize, b: usize| -> usize {
        let composed: Vec<usize> = (0..n_sites).map(|s| group[a][group[b][s]]).collect();
        group.iter().position(|p| *p == composed).expect("group is closed")
    };
    let mut chars = Vec::new();
    for signs in 0..1usize << g {
        let chi: Vec<f64> = (0..g).map(|k| if signs >> k & 1 == 1 { -1.0 } else { 1.0 }).collect();
        if chi[0] != 1.0 {
            continue;
        }
        let homomorphic = (0..g).all(|a| (0..g).all(|b| chi[product(a, b)] == chi[a] * chi[b]));
        if homomorphic {
            chars.push(chi);
        }
    }
    chars
}

struct Orbits {
    /// Representative (smallest state) of each orbit.
    reps: Vec<usize>,
    /// For each basis index: (orbit id, group element mapping the state to its representative).
    owner: Vec<(usize, usize)>,
    /// Group elements fixing each representative.
    stabilizers: Vec<Vec<usize>>,
}

fn orbits(basis: &SectorBasis, group: &[Vec<usize>]) -> Orbits {
    let mut reps = Vec::new();
    let mut stabilizers = Vec::new();
    let mut owner = vec![(usize::MAX, 0); basis.dim()];
    for (idx, &s) in basis.states().iter().enumerate() {
        if owner[idx].0 != usize::MAX {
            continue;
        }
        // States are visited in increasing order, so `s` is its orbit's minimum.
        let id = reps.len();
        reps.push(s);
        let mut stab = Vec::new();
        for (k, p) in group.iter().enumerate() {
            let t = permute(p, s);
            if t == s {
                stab.push(k);
            }
            let ti = basis.index_of(t);
            if owner[ti].0 == usize::MAX {
                // Involutions: the element mapping s to t also maps t back to s.
                owner[ti] = (id, k);
            }
        }
        stabilizers.push(stab);
    }
    Orbits { reps, owner, stabilizers }
}

/// Eigenvalues of sector `n`, assembled from the symmetry blocks.
pub(crate) fn sector_eigenvalues(spec: &LatticeSpec, n: usize, delta: f64) -> Result<Vec<f64>> {
    let basis = SectorBasis::new(spec.n_sites(), n)?;
    let group = reflection_group(spec);
    let orb = orbits(&basis, &group);
    let bonds: Vec<(usize, f64)> = spec.bonds().iter().map(|b| (b.mask(), b.strength)).collect();
    let orbit_size: Vec<f64> =
        orb.stabilizers.iter().map(|st| (group.len() / st.len()) as f64).collect();

    let mut all = Vec::with_capacity(basis.dim());
    for chi in characters(&group) {
        let valid: Vec<usize> = (0..orb.reps.len())
            .filter(|&r| orb.stabilizers[r].iter().all(|&k| chi[k] == 1.0))
            .collect();
        let mut block_index = vec![usize::MAX; orb.reps.len()];
        for (k, &r) in valid.iter().enumerate() {
            block_index[r] = k;
        }
        let dim = valid.len();
        if dim == 0 {
            continue;
        }
        let mut matrix = vec![0.0; dim * dim];
        parallel::fill_chunks(&mut matrix, dim, |offset, row| {
            let col = offset / dim;
            let r = valid[col];
            let s = orb.reps[r];
            row[col] += fock_energy(spec, delta, s);
            for &(mask, j) in &bonds {
                let x = s & mask;
                if x == 0 || x == mask {
                    continue;
                }
                let (target, k) = orb.owner[basis.index_of(s ^ mask)];
                let bi = block_index[target];
                if bi != usize::MAX {
                    row[bi] += (orbit_size[r] / orbit_size[target]).sqrt() * chi[k] * j;
                }
            }
        });
        // `row` holds column `col` of the block; the block is symmetric.
        all.extend(symmetric_eigenvalues(dim, &matrix)?);
    }
    all.sort_by(|a, b| a.total_cmp(b));
    Ok(all)
}
