//! Non-negative tables over sets of discrete variables.

/// A table over `scope` (node indices), row-major with the last variable
/// varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<usize>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<usize>, cards: Vec<usize>, values: Vec<f64>) -> Self {
        assert_eq!(scope.len(), cards.len(), "scope/cardinality length");
        assert_eq!(values.len(), cards.iter().product::<usize>(), "table size");
        debug_assert!(values.iter().all(|v| *v >= 0.0), "negative factor entry");
        Self { scope, cards, values }
    }

    /// The empty-scope factor with value 1.
    pub fn unit() -> Self {
        Self { scope: Vec::new(), cards: Vec::new(), values: vec![1.0] }
    }

    /// Indicator over one variable's allowed levels.
    pub fn indicator(var: usize, allowed: &[bool]) -> Self {
        Self::new(vec![var], vec![allowed.len()], allowed.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect())
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn contains(&self, var: usize) -> bool {
        self.scope.contains(&var)
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.scope.len()];
        for i in (0..self.scope.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Stride of each variable of `scope` inside `self` (0 when absent).
    fn strides_in(&self, scope: &[usize]) -> Vec<usize> {
        let own = self.strides();
        scope
            .iter()
            .map(|v| self.scope.iter().position(|s| s == v).map_or(0, |i| own[i]))
            .collect()
    }

    pub fn product(&self, other: &Factor) -> Factor {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(v) {
                scope.push(*v);
                cards.push(*c);
            }
        }
        let sa = self.strides_in(&scope);
        let sb = other.strides_in(&scope);
        let n: usize = cards.iter().product();
        let mut values = Vec::with_capacity(n);
        let mut assign = vec![0usize; scope.len()];
        let (mut ia, mut ib) = (0usize, 0usize);
        for _ in 0..n {
            values.push(self.values[ia] * other.values[ib]);
            for pos in (0..scope.len()).rev() {
                assign[pos] += 1;
                ia += sa[pos];
                ib += sb[pos];
                if assign[pos] < cards[pos] {
                    break;
                }
                ia -= sa[pos] * cards[pos];
                ib -= sb[pos] * cards[pos];
                assign[pos] = 0;
            }
        }
        Factor { scope, cards, values }
    }

    /// Sums `var` out. Returns a clone when `var` is not in scope.
    pub fn sum_out(&self, var: usize) -> Factor {
        let Some(pos) = self.scope.iter().position(|&v| v == var) else {
            return self.clone();
        };
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        let outer: usize = self.cards[..pos].iter().product();
        let card = self.cards[pos];
        let inner: usize = self.cards[pos + 1..].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..card {
                let src = (o * card + k) * inner;
                let dst = o * inner;
                for i in 0..inner {
                    values[dst + i] += self.values[src + i];
                }
            }
        }
        Factor { scope, cards, values }
    }

    /// Same table with variables reordered to `order` (a permutation of the scope).
    pub fn permuted(&self, order: &[usize]) -> Factor {
        assert_eq!(order.len(), self.scope.len());
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.scope.iter().position(|s| s == v).expect("permutation of scope")])
            .collect();
        let reordered = Factor { scope: order.to_vec(), cards, values: Vec::new() };
        let src_strides = self.strides_in(order);
        let n = self.values.len();
        let mut values = Vec::with_capacity(n);
        let mut assign = vec![0usize; order.len()];
        let mut idx = 0usize;
        for _ in 0..n {
            values.push(self.values[idx]);
            for pos in (0..order.len()).rev() {
                assign[pos] += 1;
                idx += src_strides[pos];
                if assign[pos] < reordered.cards[pos] {
                    break;
                }
                idx -= src_strides[pos] * reordered.cards[pos];
                assign[pos] = 0;
            }
        }
        Factor { values, ..reordered }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_then_marginal() {
        // P(A) * P(B|A), A binary, B ternary
        let a = Factor::new(vec![0], vec![2], vec![0.4, 0.6]);
        let b = Factor::new(vec![0, 1], vec![2, 3], vec![0.1, 0.2, 0.7, 0.5, 0.25, 0.25]);
        let joint = a.product(&b);
        assert_eq!(joint.scope(), &[0, 1]);
        let pb = joint.sum_out(0);
        let expected = [0.4 * 0.1 + 0.6 * 0.5, 0.4 * 0.2 + 0.6 * 0.25, 0.4 * 0.7 + 0.6 * 0.25];
        for (x, y) in pb.values().iter().zip(expected) {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((joint.total() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn product_with_disjoint_scopes_is_outer_product() {
        let a = Factor::new(vec![3], vec![2], vec![2.0, 3.0]);
        let b = Factor::new(vec![1], vec![3], vec![1.0, 10.0, 100.0]);
        assert_eq!(a.product(&b).values(), &[2.0, 20.0, 200.0, 3.0, 30.0, 300.0]);
    }

    #[test]
    fn permutation_roundtrip() {
        let f = Factor::new(vec![5, 2, 9], vec![2, 3, 2], (0..12).map(f64::from).collect());
        let g = f.permuted(&[9, 5, 2]);
        assert_eq!(g.cards(), &[2, 2, 3]);
        // entry (5=1, 2=2, 9=0): index in f = 1*6 + 2*2 + 0 = 10; in g = 0*6 + 1*3 + 2 = 5
        assert_eq!(g.values()[5], 10.0);
        assert_eq!(g.permuted(&[5, 2, 9]), f);
    }

    #[test]
    fn unit_is_identity() {
        let f = Factor::new(vec![0], vec![2], vec![0.3, 0.7]);
        assert_eq!(Factor::unit().product(&f).values(), f.values());
        assert_eq!(f.sum_out(0).values(), &[1.0]);
    }
}
