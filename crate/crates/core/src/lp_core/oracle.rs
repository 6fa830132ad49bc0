//! Brute-force vertex enumeration for the relaxation family.
//!
//! Every basic solution is the unique solution of some set of `k` active
//! constraints, so enumerating all size-`k` active sets (the equalities are
//! always active) and keeping the best feasible point gives the optimum
//! without any pivoting. Exponential, only meant as a test oracle for tiny
//! instances.

use super::{LpError, LpInstance, LpVariant};

pub const ORACLE_MAX_ARMS: usize = 8;
pub const ORACLE_MAX_RESOURCES: usize = 4;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct VertexOptimum {
    /// `−∞` when no vertex is feasible.
    pub value: f64,
    pub vertex: Vec<f64>,
}

/// Best basic feasible solution of the relaxation.
pub fn enumerate_vertex_optimum(inst: &LpInstance) -> Result<VertexOptimum, LpError> {
    enumerate_variant(inst, LpVariant::Relaxation)
}

pub fn enumerate_variant(inst: &LpInstance, variant: LpVariant) -> Result<VertexOptimum, LpError> {
    let k = inst.num_arms();
    let m = inst.num_resources();
    if k > ORACLE_MAX_ARMS || m > ORACLE_MAX_RESOURCES {
        return Err(LpError::OracleScaleExceeded {
            max_arms: ORACLE_MAX_ARMS,
            max_resources: ORACLE_MAX_RESOURCES,
        });
    }
    let rate = inst.budget_rate();

    // Constraints as (row, rhs): equalities first, then inequalities `row·p ≥ rhs`.
    let mut equalities: Vec<(Vec<f64>, f64)> = vec![(vec![1.0; k], 1.0)];
    if let LpVariant::MinusArm(x) = variant {
        let mut e = vec![0.0; k];
        e[x] = 1.0;
        equalities.push((e, 0.0));
    }
    let mut inequalities: Vec<(Vec<f64>, f64)> =
        inst.drifts.iter().map(|row| (row.clone(), -rate)).collect();
    for x in 0..k {
        let mut e = vec![0.0; k];
        e[x] = 1.0;
        inequalities.push((e, 0.0));
    }

    let (objective, constant): (Vec<f64>, f64) = match variant {
        LpVariant::MinusResource(j) => (
            (0..k)
                .map(|x| inst.rewards[x] - inst.drifts[j][x])
                .collect(),
            -rate,
        ),
        _ => (inst.rewards.clone(), 0.0),
    };

    let mut best = VertexOptimum {
        value: f64::NEG_INFINITY,
        vertex: Vec::new(),
    };
    let need = k.saturating_sub(equalities.len());
    for chosen in combinations(inequalities.len(), need) {
        let mut rows: Vec<Vec<f64>> = equalities.iter().map(|(r, _)| r.clone()).collect();
        let mut rhs: Vec<f64> = equalities.iter().map(|(_, b)| *b).collect();
        for &i in &chosen {
            rows.push(inequalities[i].0.clone());
            rhs.push(inequalities[i].1);
        }
        if rows.len() != k {
            // Two equalities with k = 1: only p = (1) with p₀ = 0, which is inconsistent.
            continue;
        }
        let Some(p) = gauss_solve(rows, rhs) else {
            continue;
        };
        let feasible = equalities
            .iter()
            .all(|(r, b)| (dot(r, &p) - b).abs() <= FEASIBILITY_TOL)
            && inequalities
                .iter()
                .all(|(r, b)| dot(r, &p) >= b - FEASIBILITY_TOL);
        if !feasible {
            continue;
        }
        let value = dot(&objective, &p) + constant;
        if value > best.value {
            best = VertexOptimum { value, vertex: p };
        }
    }
    Ok(best)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All `r`-subsets of `0..n` in lexicographic order.
fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == r {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            if n - i < r - current.len() {
                break;
            }
            current.push(i);
            rec(i + 1, n, r, current, out);
            current.pop();
        }
    }
    rec(0, n, r, &mut current, &mut out);
    out
}

/// Naive Gaussian elimination with partial pivoting; `None` if singular.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for i in col + 1..n {
            if a[i][col].abs() > a[piv][col].abs() {
                piv = i;
            }
        }
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(piv, col);
        b.swap(piv, col);
        for i in 0..n {
            if i == col {
                continue;
            }
            let f = a[i][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[i][j] -= f * a[col][j];
            }
            b[i] -= f * b[col];
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_counts() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn single_arm() {
        let inst = LpInstance::new(10, 0.0, vec![0.0], vec![vec![0.3]]).unwrap();
        let v = enumerate_vertex_optimum(&inst).unwrap();
        assert_eq!(v.value, 0.0);
        assert_eq!(v.vertex, vec![1.0]);
    }

    #[test]
    fn scale_guard() {
        let inst = LpInstance::unchecked(10, 0.0, vec![0.0; 9], vec![vec![0.1; 9]]);
        assert!(matches!(
            enumerate_vertex_optimum(&inst),
            Err(LpError::OracleScaleExceeded { .. })
        ));
    }
}
