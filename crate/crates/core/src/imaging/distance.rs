//! Exact Euclidean distance transform.
//!
//! Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher) on squared
//! integer distances, so results are exact before the final square root. The
//! image is surrounded by a one-pixel virtual background frame: a foreground
//! pixel touching the edge is at distance 1 from that frame.

use crate::image::{BinaryMask, Raster, ScalarField};

/// Squared distances, row-major, with the virtual frame applied.
pub fn squared_distance_transform(mask: &BinaryMask) -> Vec<u64> {
    let (w, h) = (mask.width(), mask.height());
    // Padded grid of size (w + 2) x (h + 2); the frame is background.
    let pw = w + 2;
    let ph = h + 2;

    // Column pass: 1-D distance to nearest background along each column.
    let mut cols = vec![0u64; pw * ph];
    for x in 1..=w {
        let mut last_bg = 0;
        for y in 1..ph {
            let fg = y <= h && mask.get(x - 1, y - 1);
            if !fg {
                last_bg = y;
            }
            cols[y * pw + x] = ((y - last_bg) * (y - last_bg)) as u64;
        }
        let mut next_bg = ph - 1;
        for y in (0..ph).rev() {
            let fg = y >= 1 && y <= h && mask.get(x - 1, y - 1);
            if !fg {
                next_bg = y;
            }
            let d = ((next_bg - y) * (next_bg - y)) as u64;
            let i = y * pw + x;
            cols[i] = cols[i].min(d);
        }
    }

    // Row pass: lower envelope of parabolas over the padded row.
    let mut out = vec![0u64; w * h];
    let mut row = vec![0u64; pw];
    let mut result = vec![0u64; pw];
    let mut env = Envelope::with_capacity(pw);
    for y in 1..=h {
        row.copy_from_slice(&cols[y * pw..(y + 1) * pw]);
        env.transform(&row, &mut result);
        out[(y - 1) * w..y * w].copy_from_slice(&result[1..=w]);
    }
    out
}

/// Distance from each foreground pixel centre to the nearest background pixel
/// centre; 0 on background.
pub fn distance_transform(mask: &BinaryMask) -> ScalarField {
    let values = squared_distance_transform(mask).into_iter().map(|d| (d as f64).sqrt()).collect();
    ScalarField::new(mask.width(), mask.height(), values).expect("distances are finite")
}

/// Rational breakpoint `num / den` with `den > 0`; `None` is -inf.
type Breakpoint = Option<(i128, i128)>;

struct Envelope {
    vertices: Vec<usize>,
    starts: Vec<Breakpoint>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self { vertices: Vec::with_capacity(n), starts: Vec::with_capacity(n) }
    }

    /// `out[q] = min_p (q - p)^2 + f[p]`. Requires at least one finite sample
    /// at index 0 (the frame guarantees `f[0] == 0`).
    fn transform(&mut self, f: &[u64], out: &mut [u64]) {
        let n = f.len();
        self.vertices.clear();
        self.starts.clear();
        self.vertices.push(0);
        self.starts.push(None);

        for q in 1..n {
            let fq = f[q] as i128;
            loop {
                let v = *self.vertices.last().unwrap();
                let fv = f[v] as i128;
                let (q_, v_) = (q as i128, v as i128);
                // Intersection of parabolas rooted at v and q.
                let num = (fq + q_ * q_) - (fv + v_ * v_);
                let den = 2 * (q_ - v_);
                let start = *self.starts.last().unwrap();
                let dominated = match start {
                    None => false,
                    Some((sn, sd)) => num * sd <= sn * den,
                };
                if dominated {
                    self.vertices.pop();
                    self.starts.pop();
                } else {
                    self.vertices.push(q);
                    self.starts.push(Some((num, den)));
                    break;
                }
            }
        }

        let mut k = 0;
        for (q, slot) in out.iter_mut().enumerate() {
            // Advance while the next parabola starts at or before q.
            while k + 1 < self.vertices.len() {
                let (sn, sd) = self.starts[k + 1].expect("only the first breakpoint is -inf");
                if sn <= q as i128 * sd {
                    k += 1;
                } else {
                    break;
                }
            }
            let v = self.vertices[k];
            let dq = q.abs_diff(v) as u64;
            *slot = dq * dq + f[v];
        }
    }
}
