//! Textbook affinity propagation with explicit loops, O(n^3) per sweep.

pub struct Reference {
    pub exemplars: Vec<usize>,
    pub converged: bool,
}

/// `s` holds similarities with preferences on the diagonal.
pub fn affinity_propagation(s: &[Vec<f64>], damping: f64, max_iter: usize, window: usize) -> Reference {
    let n = s.len();
    if n == 1 {
        return Reference { exemplars: vec![0], converged: true };
    }
    let mut r = vec![vec![0.0; n]; n];
    let mut a = vec![vec![0.0; n]; n];
    let mut prev: Vec<usize> = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    for _ in 0..max_iter {
        let mut r_new = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let mut competitor = f64::NEG_INFINITY;
                for kk in 0..n {
                    if kk != k {
                        competitor = competitor.max(a[i][kk] + s[i][kk]);
                    }
                }
                r_new[i][k] = s[i][k] - competitor;
            }
        }
        for i in 0..n {
            for k in 0..n {
                r[i][k] = damping * r[i][k] + (1.0 - damping) * r_new[i][k];
            }
        }
        let mut a_new = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                if i == k {
                    let mut total = 0.0;
                    for ii in 0..n {
                        if ii != k {
                            total += r[ii][k].max(0.0);
                        }
                    }
                    a_new[k][k] = total;
                } else {
                    let mut total = r[k][k];
                    for ii in 0..n {
                        if ii != i && ii != k {
                            total += r[ii][k].max(0.0);
                        }
                    }
                    a_new[i][k] = total.min(0.0);
                }
            }
        }
        for i in 0..n {
            for k in 0..n {
                a[i][k] = damping * a[i][k] + (1.0 - damping) * a_new[i][k];
            }
        }
        let ex: Vec<usize> = (0..n).filter(|&k| r[k][k] + a[k][k] > 0.0).collect();
        if ex == prev {
            stable += 1;
        } else {
            stable = 1;
            prev = ex;
        }
        if stable >= window && !prev.is_empty() {
            converged = true;
            break;
        }
    }
    if prev.is_empty() {
        let mut best = 0;
        for k in 1..n {
            if r[k][k] + a[k][k] > r[best][best] + a[best][best] {
                best = k;
            }
        }
        prev.push(best);
    }
    Reference { exemplars: prev, converged }
}
