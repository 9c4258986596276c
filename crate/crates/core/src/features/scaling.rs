use crate::domain::Scaling;

/// Per-component affine map fitted by min-max over an enumerated space.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaler {
    range: Scaling,
    scale: Vec<f64>,
    offset: Vec<f64>,
}

impl Scaler {
    /// Components flagged in `bias` keep their (constant one) value; other
    /// constant components map to the midpoint of the target range.
    pub fn fit<'a>(
        rows: impl IntoIterator<Item = &'a [f64]>,
        range: Scaling,
        bias: &[bool],
    ) -> Self {
        let dim = bias.len();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for row in rows {
            debug_assert_eq!(row.len(), dim);
            for (j, &x) in row.iter().enumerate() {
                lo[j] = lo[j].min(x);
                hi[j] = hi[j].max(x);
            }
        }
        let Some((a, b)) = range.range() else {
            return Self {
                range,
                scale: vec![1.0; dim],
                offset: vec![0.0; dim],
            };
        };
        let mut scale = vec![1.0; dim];
        let mut offset = vec![0.0; dim];
        for j in 0..dim {
            if bias[j] {
                continue;
            }
            if hi[j] > lo[j] {
                scale[j] = (b - a) / (hi[j] - lo[j]);
                offset[j] = a - lo[j] * scale[j];
            } else {
                scale[j] = 0.0;
                offset[j] = 0.5 * (a + b);
            }
        }
        Self {
            range,
            scale,
            offset,
        }
    }

    pub fn range(&self) -> Scaling {
        self.range
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(self.scale.iter().zip(&self.offset))
            .map(|(x, (s, o))| s * x + o)
            .collect()
    }
}
