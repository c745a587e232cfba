//! Adaptive one-dimensional quadrature.
//!
//! Two rules share one globally adaptive driver: the interval with the
//! largest error estimate is bisected until the summed estimate meets the
//! tolerance. Gauss–Kronrod 7/15 is the workhorse; a fixed-order
//! Gauss–Legendre rule (error taken from panel-versus-halves) backs the
//! Laplace exponent.

use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const GL_ORDER: usize = 20;
const MAX_PANELS: usize = 5_000;

/// Result of a quadrature: value and estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    GaussKronrod15,
    GaussLegendre20,
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
fn gauss_legendre_nodes(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static NODES: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    NODES.get_or_init(|| gauss_legendre_nodes(GL_ORDER))
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Quad {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Quad {
        value: kronrod * half,
        err: ((kronrod - gauss) * half).abs(),
    }
}

fn gl_panel<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> f64 {
    let (x, w) = gl20();
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter()
        .zip(w)
        .map(|(xi, wi)| wi * f(center + half * xi))
        .sum::<f64>()
        * half
}

fn gl_rule<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Quad {
    let m = 0.5 * (a + b);
    let whole = gl_panel(f, a, b);
    let halves = gl_panel(f, a, m) + gl_panel(f, m, b);
    Quad {
        value: halves,
        err: (whole - halves).abs(),
    }
}

struct Panel {
    a: f64,
    b: f64,
    q: Quad,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.q.err == other.q.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.q.err.total_cmp(&other.q.err)
    }
}

/// Integrates `f` over the finite interval `[a, b]` to
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    rule: Rule,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad { value: 0.0, err: 0.0 });
    }
    let apply = |f: &mut F, a: f64, b: f64| match rule {
        Rule::GaussKronrod15 => gk15(f, a, b),
        Rule::GaussLegendre20 => gl_rule(f, a, b),
    };
    let first = apply(&mut f, a, b);
    let mut total = first;
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, q: first });
    loop {
        if !total.value.is_finite() || total.err.is_nan() {
            return Err(Error::Quadrature { func: "integrate", err: total.err });
        }
        if total.err <= abs_tol.max(rel_tol * total.value.abs()) {
            return Ok(total);
        }
        if heap.len() >= MAX_PANELS {
            return Err(Error::Quadrature { func: "integrate", err: total.err });
        }
        let worst = heap.pop().expect("heap never empty");
        let m = 0.5 * (worst.a + worst.b);
        if m <= worst.a || m >= worst.b {
            return Err(Error::Quadrature { func: "integrate", err: total.err });
        }
        let left = apply(&mut f, worst.a, m);
        let right = apply(&mut f, m, worst.b);
        total.value += left.value + right.value - worst.q.value;
        total.err += left.err + right.err - worst.q.err;
        heap.push(Panel { a: worst.a, b: m, q: left });
        heap.push(Panel { a: m, b: worst.b, q: right });
        if heap.len() % 64 == 0 {
            // resum to stop drift from the running updates
            total = sum_heap(&heap);
        }
    }
}

fn sum_heap(heap: &BinaryHeap<Panel>) -> Quad {
    heap.iter().fold(Quad { value: 0.0, err: 0.0 }, |acc, p| Quad {
        value: acc.value + p.q.value,
        err: acc.err + p.q.err,
    })
}

/// Gauss–Kronrod integration over `[a, b]`.
pub fn integrate_gk<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<Quad> {
    integrate(f, a, b, rel_tol, abs_tol, Rule::GaussKronrod15)
}

/// Integrates over `[a, ∞)` through the map `x = a + t/(1−t)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(mut f: F, a: f64, rel_tol: f64, abs_tol: f64) -> Result<Quad> {
    integrate_gk(
        |t| {
            let u = 1.0 - t;
            let v = f(a + t / u) / (u * u);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}
