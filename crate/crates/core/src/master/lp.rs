//! Linear programming oracle.
//!
//! The contract: minimize `cᵀx` subject to row constraints `aᵢᵀx (≤|=|≥) bᵢ`
//! and `x ≥ 0`. A solver returns primal values, one dual per row with the
//! sign convention of a minimization (`≤` rows nonpositive, `≥` rows
//! nonnegative, `=` rows free) so that `c_j − yᵀA_j ≥ 0` for every column at
//! an optimum, and a basis that may be handed back to warm start the next
//! solve after columns were appended.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Default)]
pub struct LpColumn {
    pub cost: f64,
    /// Sparse `(row, coefficient)` entries.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct LpProblem {
    pub sense: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub columns: Vec<LpColumn>,
}

impl LpProblem {
    pub fn add_row(&mut self, sense: Sense, rhs: f64) -> usize {
        self.sense.push(sense);
        self.rhs.push(rhs);
        self.sense.len() - 1
    }

    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> usize {
        self.columns.push(LpColumn { cost, entries });
        self.columns.len() - 1
    }

    pub fn n_rows(&self) -> usize {
        self.rhs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisVar {
    Column(usize),
    Slack(usize),
    Artificial(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis(pub Vec<BasisVar>);

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub basis: Basis,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("the problem is infeasible")]
    Infeasible,
    #[error("the problem is unbounded")]
    Unbounded,
    #[error("iteration limit reached")]
    IterationLimit,
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub trait LpSolver: Send {
    fn solve(&mut self, lp: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution, LpError>;
}

/// Revised simplex with an explicit dense basis inverse.
#[derive(Debug, Clone)]
pub struct DenseSimplex {
    pub tol: f64,
    pub max_iterations: usize,
    /// Refactorize the basis inverse after this many updates.
    pub refactor_every: usize,
    /// Switch to Bland's rule after this many consecutive degenerate pivots.
    pub degenerate_limit: usize,
}

impl Default for DenseSimplex {
    fn default() -> Self {
        Self { tol: 1e-9, max_iterations: 200_000, refactor_every: 100, degenerate_limit: 50 }
    }
}

/// Working copy with rows scaled to nonnegative right-hand sides.
struct Work<'a> {
    lp: &'a LpProblem,
    m: usize,
    n: usize,
    /// +1 or −1 per row
    flip: Vec<f64>,
    rhs: Vec<f64>,
    /// slack coefficient per row after flipping, 0 for equalities
    slack: Vec<f64>,
}

impl<'a> Work<'a> {
    fn new(lp: &'a LpProblem) -> Self {
        let m = lp.n_rows();
        let mut flip = vec![1.0; m];
        let mut rhs = lp.rhs.clone();
        let mut slack = vec![0.0; m];
        for r in 0..m {
            if rhs[r] < 0.0 {
                flip[r] = -1.0;
                rhs[r] = -rhs[r];
            }
            slack[r] = match lp.sense[r] {
                Sense::Le => flip[r],
                Sense::Ge => -flip[r],
                Sense::Eq => 0.0,
            };
        }
        Self { lp, m, n: lp.columns.len(), flip, rhs, slack }
    }

    /// Dense column of a variable in the flipped system.
    fn column(&self, v: BasisVar) -> Vec<f64> {
        let mut a = vec![0.0; self.m];
        match v {
            BasisVar::Column(j) => {
                for &(r, x) in &self.lp.columns[j].entries {
                    a[r] += x * self.flip[r];
                }
            }
            BasisVar::Slack(r) => a[r] = self.slack[r],
            BasisVar::Artificial(r) => a[r] = 1.0,
        }
        a
    }

    fn dot(&self, y: &[f64], v: BasisVar) -> f64 {
        match v {
            BasisVar::Column(j) => self.lp.columns[j].entries.iter().map(|&(r, x)| y[r] * x * self.flip[r]).sum(),
            BasisVar::Slack(r) => y[r] * self.slack[r],
            BasisVar::Artificial(r) => y[r],
        }
    }

    fn valid(&self, v: BasisVar) -> bool {
        match v {
            BasisVar::Column(j) => j < self.n,
            BasisVar::Slack(r) => r < self.m && self.slack[r] != 0.0,
            BasisVar::Artificial(r) => r < self.m,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    One,
    Two,
}

struct State {
    basis: Vec<BasisVar>,
    binv: Vec<Vec<f64>>,
    x: Vec<f64>,
    updates: usize,
    iterations: usize,
}

fn invert(mat: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = mat.len();
    let mut a: Vec<Vec<f64>> = mat.to_vec();
    let mut inv: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for c in 0..m {
        let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-11 {
            return None;
        }
        a.swap(c, p);
        inv.swap(c, p);
        let d = a[c][c];
        for k in 0..m {
            a[c][k] /= d;
            inv[c][k] /= d;
        }
        for r in 0..m {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c];
                for k in 0..m {
                    a[r][k] -= f * a[c][k];
                    inv[r][k] -= f * inv[c][k];
                }
            }
        }
    }
    Some(inv)
}

impl DenseSimplex {
    fn cost(w: &Work, phase: Phase, v: BasisVar) -> f64 {
        match (phase, v) {
            (Phase::One, BasisVar::Artificial(_)) => 1.0,
            (Phase::One, _) => 0.0,
            (Phase::Two, BasisVar::Column(j)) => w.lp.columns[j].cost,
            (Phase::Two, _) => 0.0,
        }
    }

    fn factor(&self, w: &Work, st: &mut State) -> Result<(), LpError> {
        let m = w.m;
        // B stored row-major: B[r][k] = column k's entry in row r
        let cols: Vec<Vec<f64>> = st.basis.iter().map(|&v| w.column(v)).collect();
        let b: Vec<Vec<f64>> = (0..m).map(|r| (0..m).map(|k| cols[k][r]).collect()).collect();
        st.binv = invert(&b).ok_or_else(|| LpError::Numerical("singular basis".into()))?;
        st.x = (0..m).map(|i| (0..m).map(|r| st.binv[i][r] * w.rhs[r]).sum()).collect();
        st.updates = 0;
        Ok(())
    }

    fn run(&self, w: &Work, st: &mut State, phase: Phase) -> Result<(), LpError> {
        let m = w.m;
        let mut in_basis = vec![false; w.n + 2 * m];
        let key = |v: BasisVar| match v {
            BasisVar::Column(j) => j,
            BasisVar::Slack(r) => w.n + r,
            BasisVar::Artificial(r) => w.n + m + r,
        };
        for &v in &st.basis {
            in_basis[key(v)] = true;
        }
        let mut degenerate = 0usize;
        loop {
            if st.iterations >= self.max_iterations {
                return Err(LpError::IterationLimit);
            }
            if st.updates >= self.refactor_every {
                self.factor(w, st)?;
            }
            // duals y = c_B B⁻¹
            let cb: Vec<f64> = st.basis.iter().map(|&v| Self::cost(w, phase, v)).collect();
            let y: Vec<f64> = (0..m).map(|r| (0..m).map(|i| cb[i] * st.binv[i][r]).sum()).collect();

            let bland = degenerate >= self.degenerate_limit;
            let mut entering: Option<(BasisVar, f64)> = None;
            let candidates = (0..w.n)
                .map(BasisVar::Column)
                .chain((0..m).filter(|&r| w.slack[r] != 0.0).map(BasisVar::Slack))
                .chain((0..m).map(BasisVar::Artificial).filter(|_| phase == Phase::One));
            for v in candidates {
                if in_basis[key(v)] {
                    continue;
                }
                let d = Self::cost(w, phase, v) - w.dot(&y, v);
                if d < -self.tol * 10.0 {
                    if bland {
                        entering = Some((v, d));
                        break;
                    }
                    if entering.map_or(true, |(_, best)| d < best) {
                        entering = Some((v, d));
                    }
                }
            }
            let Some((enter, _)) = entering else {
                return Ok(());
            };

            // direction u = B⁻¹ a
            let a = w.column(enter);
            let u: Vec<f64> = (0..m).map(|i| (0..m).map(|r| st.binv[i][r] * a[r]).sum()).collect();
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let artificial = matches!(st.basis[i], BasisVar::Artificial(_));
                if phase == Phase::Two && artificial && u[i].abs() > self.tol {
                    // artificials stay at zero in phase two
                    leave = Some((i, 0.0));
                    break;
                }
                if u[i] > self.tol {
                    let ratio = st.x[i].max(0.0) / u[i];
                    let better = match leave {
                        None => true,
                        Some((k, best)) => {
                            if ratio < best - 1e-12 {
                                true
                            } else if ratio <= best + 1e-12 {
                                if bland {
                                    key(st.basis[i]) < key(st.basis[k])
                                } else {
                                    u[i] > u[k]
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, step)) = leave else {
                return Err(LpError::Unbounded);
            };
            degenerate = if step <= 1e-12 { degenerate + 1 } else { 0 };

            // update x and B⁻¹
            for i in 0..m {
                if i != r {
                    st.x[i] -= step * u[i];
                }
            }
            st.x[r] = step;
            let piv = u[r];
            let row_r: Vec<f64> = st.binv[r].iter().map(|v| v / piv).collect();
            for i in 0..m {
                if i != r && u[i] != 0.0 {
                    let f = u[i];
                    for (k, v) in st.binv[i].iter_mut().enumerate() {
                        *v -= f * row_r[k];
                    }
                }
            }
            st.binv[r] = row_r;
            in_basis[key(st.basis[r])] = false;
            in_basis[key(enter)] = true;
            st.basis[r] = enter;
            st.updates += 1;
            st.iterations += 1;
        }
    }

    fn cold_basis(w: &Work) -> Vec<BasisVar> {
        (0..w.m).map(|r| if w.slack[r] > 0.0 { BasisVar::Slack(r) } else { BasisVar::Artificial(r) }).collect()
    }

    fn try_warm(&self, w: &Work, warm: &Basis) -> Option<State> {
        if warm.0.len() != w.m || !warm.0.iter().all(|&v| w.valid(v)) {
            return None;
        }
        let mut st = State { basis: warm.0.clone(), binv: Vec::new(), x: Vec::new(), updates: 0, iterations: 0 };
        self.factor(w, &mut st).ok()?;
        let feasible = st.x.iter().all(|&v| v >= -1e-7);
        let artificial_zero =
            st.basis.iter().zip(&st.x).all(|(v, &x)| !matches!(v, BasisVar::Artificial(_)) || x.abs() <= 1e-7);
        (feasible && artificial_zero).then_some(st)
    }
}

impl LpSolver for DenseSimplex {
    fn solve(&mut self, lp: &LpProblem, warm: Option<&Basis>) -> Result<LpSolution, LpError> {
        let w = Work::new(lp);
        let m = w.m;
        let mut st = match warm.and_then(|b| self.try_warm(&w, b)) {
            Some(st) => st,
            None => {
                let mut st = State { basis: Self::cold_basis(&w), binv: Vec::new(), x: Vec::new(), updates: 0, iterations: 0 };
                self.factor(&w, &mut st)?;
                if st.basis.iter().any(|v| matches!(v, BasisVar::Artificial(_))) {
                    self.run(&w, &mut st, Phase::One)?;
                    self.factor(&w, &mut st)?;
                    let infeas: f64 = st
                        .basis
                        .iter()
                        .zip(&st.x)
                        .filter(|(v, _)| matches!(v, BasisVar::Artificial(_)))
                        .map(|(_, x)| x.max(0.0))
                        .sum();
                    if infeas > 1e-7 {
                        return Err(LpError::Infeasible);
                    }
                }
                st
            }
        };
        self.run(&w, &mut st, Phase::Two)?;
        self.factor(&w, &mut st)?;

        let mut primal = vec![0.0; w.n];
        for (i, &v) in st.basis.iter().enumerate() {
            if let BasisVar::Column(j) = v {
                primal[j] = st.x[i].max(0.0);
            }
        }
        let cb: Vec<f64> = st.basis.iter().map(|&v| Self::cost(&w, Phase::Two, v)).collect();
        let y: Vec<f64> = (0..m).map(|r| (0..m).map(|i| cb[i] * st.binv[i][r]).sum()).collect();
        let duals: Vec<f64> = (0..m).map(|r| y[r] * w.flip[r]).collect();
        let objective = lp.columns.iter().zip(&primal).map(|(c, x)| c.cost * x).sum();
        Ok(LpSolution { objective, primal, duals, basis: Basis(st.basis), iterations: st.iterations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(rows: &[(Sense, f64)], cols: &[(f64, &[(usize, f64)])]) -> LpProblem {
        let mut p = LpProblem::default();
        for &(s, b) in rows {
            p.add_row(s, b);
        }
        for &(c, e) in cols {
            p.add_column(c, e.to_vec());
        }
        p
    }

    #[test]
    fn single_covering_column() {
        let p = lp(&[(Sense::Eq, 1.0), (Sense::Le, 3.0)], &[(4.5, &[(0, 1.0), (1, 1.0)])]);
        let s = DenseSimplex::default().solve(&p, None).unwrap();
        assert!((s.objective - 4.5).abs() < 1e-12);
        assert!((s.primal[0] - 1.0).abs() < 1e-12);
        assert!((s.duals[0] - 4.5).abs() < 1e-12);
        assert!(s.duals[1].abs() < 1e-12);
    }

    #[test]
    fn textbook_maximization() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 → (2, 6), 36
        let p = lp(
            &[(Sense::Le, 4.0), (Sense::Le, 12.0), (Sense::Le, 18.0)],
            &[(-3.0, &[(0, 1.0), (2, 3.0)]), (-5.0, &[(1, 2.0), (2, 2.0)])],
        );
        let s = DenseSimplex::default().solve(&p, None).unwrap();
        assert!((s.objective + 36.0).abs() < 1e-9);
        assert!((s.primal[0] - 2.0).abs() < 1e-9 && (s.primal[1] - 6.0).abs() < 1e-9);
        // shadow prices of the binding rows
        assert!((s.duals[1] + 1.5).abs() < 1e-9 && (s.duals[2] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn ge_rows_negative_rhs_and_infeasibility() {
        // min x + y, x + y ≥ 2, x − y ≥ −1
        let p = lp(&[(Sense::Ge, 2.0), (Sense::Ge, -1.0)], &[(1.0, &[(0, 1.0), (1, 1.0)]), (1.0, &[(0, 1.0), (1, -1.0)])]);
        let s = DenseSimplex::default().solve(&p, None).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-9);
        assert!(s.duals[0] >= -1e-12);
        let bad = lp(&[(Sense::Le, 1.0), (Sense::Ge, 2.0)], &[(1.0, &[(0, 1.0), (1, 1.0)])]);
        assert_eq!(DenseSimplex::default().solve(&bad, None).unwrap_err(), LpError::Infeasible);
        let unb = lp(&[(Sense::Ge, 1.0)], &[(-1.0, &[(0, 1.0)])]);
        assert_eq!(DenseSimplex::default().solve(&unb, None).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn warm_start_after_appending_a_column() {
        let mut p = lp(&[(Sense::Eq, 1.0), (Sense::Eq, 1.0)], &[(3.0, &[(0, 1.0)]), (3.0, &[(1, 1.0)])]);
        let mut solver = DenseSimplex::default();
        let s = solver.solve(&p, None).unwrap();
        assert!((s.objective - 6.0).abs() < 1e-12);
        p.add_column(4.0, vec![(0, 1.0), (1, 1.0)]);
        let t = solver.solve(&p, Some(&s.basis)).unwrap();
        assert!((t.objective - 4.0).abs() < 1e-12);
        assert!(t.iterations <= 2);
    }

    #[test]
    fn degenerate_identical_columns() {
        let p = lp(&[(Sense::Eq, 1.0)], &[(2.0, &[(0, 1.0)]), (2.0, &[(0, 1.0)])]);
        let s = DenseSimplex::default().solve(&p, None).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!((s.primal[0] + s.primal[1] - 1.0).abs() < 1e-12);
    }
}
