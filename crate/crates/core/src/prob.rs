//! Exact finite-alphabet probability tables and information measures.
//!
//! Everything here is a dense table of `f64` probabilities over named axes,
//! with entropies and (conditional) mutual informations computed by exact
//! summation in bits. These are the primitives every rate expression in the
//! crate is built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a pmf.
pub const SUM_TOL: f64 = 1e-9;

/// Hard cap on dense table sizes. Joint constructions that would exceed this
/// are rejected with [`Error::CellBudget`].
pub const MAX_CELLS: u64 = 10_000_000;

/// `-p log2(p)` with the `0 log 0 = 0` convention handled by an exact zero
/// test, so deterministic distributions come out exactly integral.
#[inline]
fn neg_p_log2_p(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.log2()
    }
}

fn validate_mass(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidPmf(format!("{what} has empty support")));
    }
    let mut sum = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::InvalidPmf(format!("{what} entry {i} is not finite")));
        }
        if p < 0.0 {
            return Err(Error::InvalidPmf(format!("{what} entry {i} is negative ({p})")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidPmf(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Probability mass function over `{0, .., n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    /// Validates non-negativity and total mass 1 (within [`SUM_TOL`]).
    /// Negative entries are rejected outright, never clamped.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_mass(&probs, "pmf")?;
        Ok(Self { probs })
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform pmf needs a non-empty support");
        Self {
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n, "point mass outside support");
        let mut probs = vec![0.0; n];
        probs[at] = 1.0;
        Self { probs }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Shannon entropy in bits; always in `[0, log2(support size)]`.
    pub fn entropy(&self) -> f64 {
        self.probs.iter().map(|&p| neg_p_log2_p(p)).sum()
    }
}

/// Entropy in bits of any nonnegative table with total mass 1.
pub fn entropy(p: &Pmf) -> f64 {
    p.entropy()
}

/// A named, ordered selection of axes of a [`JointPmf`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarGroup {
    names: Vec<String>,
}

impl VarGroup {
    /// A non-empty group. Duplicate names are rejected.
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.is_empty() {
            return Err(Error::EmptyGroup);
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::OverlappingGroups(n.clone()));
            }
        }
        Ok(Self { names })
    }

    /// The empty group, valid only as the conditioning slot of a conditional
    /// mutual information.
    pub fn empty() -> Self {
        Self { names: Vec::new() }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn union(&self, other: &VarGroup) -> VarGroup {
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        VarGroup { names }
    }
}

/// Convenience constructor: `group(["X", "S"])`.
pub fn group<const N: usize>(names: [&str; N]) -> VarGroup {
    VarGroup::new(names).expect("static group")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub size: usize,
}

/// Dense joint distribution over named finite axes, stored row-major with the
/// last axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmf {
    axes: Vec<Axis>,
    table: Vec<f64>,
}

/// Checks the cell budget for a prospective table shape.
pub fn check_cell_budget(sizes: &[usize]) -> Result<usize> {
    let mut cells: u128 = 1;
    for &s in sizes {
        cells = cells.saturating_mul(s as u128);
    }
    if cells > MAX_CELLS as u128 {
        return Err(Error::CellBudget {
            cells,
            limit: MAX_CELLS,
        });
    }
    Ok(cells as usize)
}

impl JointPmf {
    pub fn new<S: Into<String>>(axes: Vec<(S, usize)>, table: Vec<f64>) -> Result<Self> {
        let axes: Vec<Axis> = axes
            .into_iter()
            .map(|(name, size)| Axis {
                name: name.into(),
                size,
            })
            .collect();
        for (i, a) in axes.iter().enumerate() {
            if a.size == 0 {
                return Err(Error::InvalidPmf(format!("axis `{}` has size 0", a.name)));
            }
            if axes[..i].iter().any(|b| b.name == a.name) {
                return Err(Error::OverlappingGroups(a.name.clone()));
            }
        }
        let cells = check_cell_budget(&axes.iter().map(|a| a.size).collect::<Vec<_>>())?;
        if table.len() != cells {
            return Err(Error::InvalidPmf(format!(
                "table has {} cells, axes imply {cells}",
                table.len()
            )));
        }
        validate_mass(&table, "joint pmf")?;
        Ok(Self { axes, table })
    }

    /// Builds the table by evaluating `f` at every multi-index, then validates.
    pub fn from_fn<S: Into<String>>(
        axes: Vec<(S, usize)>,
        f: impl Fn(&[usize]) -> f64,
    ) -> Result<Self> {
        let axes: Vec<(String, usize)> = axes.into_iter().map(|(n, s)| (n.into(), s)).collect();
        let sizes: Vec<usize> = axes.iter().map(|&(_, s)| s).collect();
        let cells = check_cell_budget(&sizes)?;
        let mut table = Vec::with_capacity(cells);
        let mut idx = vec![0usize; sizes.len()];
        loop {
            table.push(f(&idx));
            // odometer increment, last axis fastest
            let mut k = sizes.len();
            loop {
                if k == 0 {
                    return Self::new(axes, table);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn axis_index(&self, name: &str) -> Result<usize> {
        self.axes
            .iter()
            .position(|a| a.name == name)
            .ok_or_else(|| Error::UnknownAxis(name.to_string()))
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.axes.len()];
        for i in (0..self.axes.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.axes[i + 1].size;
        }
        strides
    }

    /// Sums out every axis not in `g`; surviving axes keep their original
    /// relative order. Mass is preserved exactly up to f64 addition.
    pub fn marginal(&self, g: &VarGroup) -> Result<JointPmf> {
        if g.is_empty() {
            return Err(Error::EmptyGroup);
        }
        let mut keep = vec![false; self.axes.len()];
        for name in g.names() {
            keep[self.axis_index(name)?] = true;
        }
        let kept: Vec<usize> = (0..self.axes.len()).filter(|&i| keep[i]).collect();
        if kept.len() == self.axes.len() {
            return Ok(self.clone());
        }

        let out_axes: Vec<Axis> = kept.iter().map(|&i| self.axes[i].clone()).collect();
        let mut out_strides = vec![1usize; kept.len()];
        for i in (0..kept.len().saturating_sub(1)).rev() {
            out_strides[i] = out_strides[i + 1] * out_axes[i + 1].size;
        }
        let out_cells: usize = out_axes.iter().map(|a| a.size).product();
        let mut out = vec![0.0; out_cells];

        let sizes: Vec<usize> = self.axes.iter().map(|a| a.size).collect();
        let mut idx = vec![0usize; sizes.len()];
        for &p in &self.table {
            let mut o = 0;
            for (j, &ai) in kept.iter().enumerate() {
                o += idx[ai] * out_strides[j];
            }
            out[o] += p;
            let mut k = sizes.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < sizes[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(JointPmf {
            axes: out_axes,
            table: out,
        })
    }

    /// Joint entropy of the whole table, in bits.
    pub fn entropy(&self) -> f64 {
        self.table.iter().map(|&p| neg_p_log2_p(p)).sum()
    }

    /// Entropy of the marginal on `g`; `H(empty) = 0`.
    pub fn entropy_of(&self, g: &VarGroup) -> Result<f64> {
        if g.is_empty() {
            return Ok(0.0);
        }
        Ok(self.marginal(g)?.entropy())
    }

    /// `I(A;B|C)` in bits by exact summation, computed as
    /// `H(A,C) + H(B,C) - H(A,B,C) - H(C)`. The groups must be pairwise
    /// disjoint; `c` may be empty for a plain mutual information. Tiny
    /// negative values from rounding are clamped to zero.
    pub fn conditional_mutual_information(
        &self,
        a: &VarGroup,
        b: &VarGroup,
        c: &VarGroup,
    ) -> Result<f64> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::EmptyGroup);
        }
        for n in a.names() {
            if b.names().contains(n) || c.names().contains(n) {
                return Err(Error::OverlappingGroups(n.clone()));
            }
        }
        for n in b.names() {
            if c.names().contains(n) {
                return Err(Error::OverlappingGroups(n.clone()));
            }
        }
        let h_ac = self.entropy_of(&a.union(c))?;
        let h_bc = self.entropy_of(&b.union(c))?;
        let h_abc = self.entropy_of(&a.union(b).union(c))?;
        let h_c = self.entropy_of(c)?;
        let v = h_ac + h_bc - h_abc - h_c;
        debug_assert!(v >= -1e-9, "CMI fell below -1e-9: {v}");
        Ok(v.max(0.0))
    }

    /// `I(A;B)`.
    pub fn mutual_information(&self, a: &VarGroup, b: &VarGroup) -> Result<f64> {
        self.conditional_mutual_information(a, b, &VarGroup::empty())
    }

    /// Independent product of two joints (axis names must not collide).
    pub fn product(&self, other: &JointPmf) -> Result<JointPmf> {
        let mut axes: Vec<(String, usize)> = self
            .axes
            .iter()
            .map(|a| (a.name.clone(), a.size))
            .collect();
        axes.extend(other.axes.iter().map(|a| (a.name.clone(), a.size)));
        let n = other.table.len();
        let mut table = Vec::with_capacity(self.table.len() * n);
        for &p in &self.table {
            for &q in &other.table {
                table.push(p * q);
            }
        }
        JointPmf::new(axes, table)
    }

    /// Lifts a [`Pmf`] to a single-axis joint.
    pub fn from_pmf<S: Into<String>>(name: S, pmf: &Pmf) -> Self {
        JointPmf {
            axes: vec![Axis {
                name: name.into(),
                size: pmf.len(),
            }],
            table: pmf.probs().to_vec(),
        }
    }
}

/// Marginalize `j` onto `g` (operation form of [`JointPmf::marginal`]).
pub fn marginal(j: &JointPmf, g: &VarGroup) -> Result<JointPmf> {
    j.marginal(g)
}

/// Operation form of [`JointPmf::conditional_mutual_information`].
pub fn conditional_mutual_information(
    j: &JointPmf,
    a: &VarGroup,
    b: &VarGroup,
    c: &VarGroup,
) -> Result<f64> {
    j.conditional_mutual_information(a, b, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent oracle: direct -sum p log2 p over a slice, written without
    // going through Pmf/JointPmf.
    fn oracle_entropy(ps: &[f64]) -> f64 {
        ps.iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.log2())
            .sum()
    }

    #[test]
    fn entropy_uniform_four() {
        assert_eq!(Pmf::uniform(4).entropy(), 2.0);
    }

    #[test]
    fn entropy_point_mass_is_zero() {
        assert_eq!(Pmf::point_mass(5, 2).entropy(), 0.0);
    }

    #[test]
    fn entropy_binary_011() {
        // frozen from the direct-summation oracle
        let expected = 0.499915958164528;
        assert!((oracle_entropy(&[0.11, 0.89]) - expected).abs() < 1e-15);
        let p = Pmf::new(vec![0.11, 0.89]).unwrap();
        assert!((p.entropy() - expected).abs() < 1e-12);
    }

    #[test]
    fn pmf_rejects_negative_and_bad_mass() {
        assert!(Pmf::new(vec![0.5, -0.1, 0.6]).is_err());
        assert!(Pmf::new(vec![0.5, 0.4]).is_err());
        assert!(Pmf::new(vec![]).is_err());
        assert!(Pmf::new(vec![0.5, 0.5 + 2e-9]).is_err());
        assert!(Pmf::new(vec![0.5, 0.5 + 2e-10]).is_ok());
    }

    #[test]
    fn marginal_identity_and_independence() {
        let a = Pmf::new(vec![0.2, 0.8]).unwrap();
        let b = Pmf::new(vec![0.1, 0.4, 0.5]).unwrap();
        let j = JointPmf::from_pmf("A", &a)
            .product(&JointPmf::from_pmf("B", &b))
            .unwrap();

        let all = j.marginal(&group(["A", "B"])).unwrap();
        assert_eq!(all.table(), j.table());

        let ma = j.marginal(&group(["A"])).unwrap();
        for (i, &p) in ma.table().iter().enumerate() {
            assert!((p - a.prob(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn marginal_unknown_axis_errors() {
        let j = JointPmf::from_pmf("A", &Pmf::uniform(2));
        assert!(matches!(
            j.marginal(&group(["Z"])),
            Err(Error::UnknownAxis(_))
        ));
    }

    #[test]
    fn marginal_composition_matches_direct() {
        // random 3-axis joint: marginal(AB) then marginal(A) == marginal(A)
        let mut raw = vec![0.0; 2 * 3 * 2];
        let mut x = 0.37_f64;
        for v in raw.iter_mut() {
            x = (x * 997.13).fract();
            *v = x + 1e-3;
        }
        let s: f64 = raw.iter().sum();
        for v in raw.iter_mut() {
            *v /= s;
        }
        let j = JointPmf::new(vec![("A", 2), ("B", 3), ("C", 2)], raw).unwrap();
        let two_step = j
            .marginal(&group(["A", "B"]))
            .unwrap()
            .marginal(&group(["A"]))
            .unwrap();
        let direct = j.marginal(&group(["A"])).unwrap();
        for (p, q) in two_step.table().iter().zip(direct.table()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn mi_perfect_dependence_and_independence() {
        // X uniform binary, Y = X
        let coupled = JointPmf::new(
            vec![("X", 2), ("Y", 2)],
            vec![0.5, 0.0, 0.0, 0.5],
        )
        .unwrap();
        let mi = coupled
            .mutual_information(&group(["X"]), &group(["Y"]))
            .unwrap();
        assert!((mi - 1.0).abs() < 1e-12);

        let indep = JointPmf::from_pmf("X", &Pmf::uniform(2))
            .product(&JointPmf::from_pmf("Y", &Pmf::uniform(2)))
            .unwrap();
        let mi0 = indep
            .mutual_information(&group(["X"]), &group(["Y"]))
            .unwrap();
        assert!(mi0.abs() < 1e-12);
    }

    #[test]
    fn mi_binary_symmetric_flip_011() {
        // I(X;Y) = 1 - H_b(0.11), frozen from the oracle
        let f = 0.11;
        let j = JointPmf::new(
            vec![("X", 2), ("Y", 2)],
            vec![0.5 * (1.0 - f), 0.5 * f, 0.5 * f, 0.5 * (1.0 - f)],
        )
        .unwrap();
        let mi = j.mutual_information(&group(["X"]), &group(["Y"])).unwrap();
        assert!((mi - 0.500084041835472).abs() < 1e-12);
    }

    #[test]
    fn cmi_rejects_overlap_and_empty() {
        let j = JointPmf::from_pmf("A", &Pmf::uniform(2))
            .product(&JointPmf::from_pmf("B", &Pmf::uniform(2)))
            .unwrap();
        assert!(j
            .conditional_mutual_information(&group(["A"]), &group(["A"]), &VarGroup::empty())
            .is_err());
        assert!(j
            .conditional_mutual_information(&group(["A"]), &group(["B"]), &group(["B"]))
            .is_err());
        assert!(VarGroup::new(Vec::<String>::new()).is_err());
    }

    #[test]
    fn cell_budget_enforced() {
        let err = JointPmf::from_fn(vec![("A", 3000), ("B", 3000), ("C", 3000)], |_| 0.0);
        assert!(matches!(err, Err(Error::CellBudget { .. })));
    }

    // ---- property tests --------------------------------------------------

    fn arb_joint(max_axes: usize, max_size: usize) -> impl Strategy<Value = JointPmf> {
        (2..=max_axes)
            .prop_flat_map(move |n_axes| {
                proptest::collection::vec(2..=max_size, n_axes)
            })
            .prop_flat_map(|sizes| {
                let cells: usize = sizes.iter().product();
                (
                    Just(sizes),
                    proptest::collection::vec(1e-4..1.0f64, cells),
                )
            })
            .prop_map(|(sizes, mut raw)| {
                let total: f64 = raw.iter().sum();
                for v in raw.iter_mut() {
                    *v /= total;
                }
                let axes: Vec<(String, usize)> = sizes
                    .iter()
                    .enumerate()
                    .map(|(i, &s)| (format!("A{i}"), s))
                    .collect();
                JointPmf::new(axes, raw).unwrap()
            })
    }

    proptest! {
        #[test]
        fn chain_rule_holds(j in arb_joint(5, 3)) {
            // I(A0; A1, A2) = I(A0; A1) + I(A0; A2 | A1) on >= 3-axis joints
            prop_assume!(j.axes().len() >= 3);
            let a = group(["A0"]);
            let b = group(["A1"]);
            let c = group(["A2"]);
            let lhs = j.conditional_mutual_information(&a, &VarGroup::new(["A1", "A2"]).unwrap(), &VarGroup::empty()).unwrap();
            let rhs = j.mutual_information(&a, &b).unwrap()
                + j.conditional_mutual_information(&a, &c, &b).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn cmi_symmetric_and_nonnegative(j in arb_joint(4, 3)) {
            let a = group(["A0"]);
            let b = group(["A1"]);
            let c = if j.axes().len() > 2 { group(["A2"]) } else { VarGroup::empty() };
            let ab = j.conditional_mutual_information(&a, &b, &c).unwrap();
            let ba = j.conditional_mutual_information(&b, &a, &c).unwrap();
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(ab >= 0.0);
        }

        #[test]
        fn relabeling_leaves_measures_unchanged(j in arb_joint(4, 3)) {
            // reverse the symbols of axis A0
            let ai = j.axis_index("A0").unwrap();
            let sizes: Vec<usize> = j.axes().iter().map(|a| a.size).collect();
            let axes: Vec<(String, usize)> =
                j.axes().iter().map(|a| (a.name.clone(), a.size)).collect();
            let relabeled = JointPmf::from_fn(axes, |idx| {
                let mut src = idx.to_vec();
                src[ai] = sizes[ai] - 1 - idx[ai];
                let mut flat = 0;
                for (k, &s) in sizes.iter().enumerate() {
                    flat = flat * s + src[k];
                }
                j.table()[flat]
            }).unwrap();
            let a = group(["A0"]);
            let b = group(["A1"]);
            prop_assert!((j.entropy() - relabeled.entropy()).abs() < 1e-12);
            let m1 = j.mutual_information(&a, &b).unwrap();
            let m2 = relabeled.mutual_information(&a, &b).unwrap();
            prop_assert!((m1 - m2).abs() < 1e-12);
        }
    }
}
