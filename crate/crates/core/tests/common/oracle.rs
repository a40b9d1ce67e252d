//! Independent reference integrators for the history terms.
//!
//! Nothing here reuses the library's quadrature: integrals are evaluated by
//! adaptive Gauss-Kronrod (7/15) with change-of-variable tricks that remove
//! the kernel singularities.

#![allow(clippy::excessive_precision, dead_code)]

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_64, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let n = fc.len();
    let mut k: Vec<f64> = fc.iter().map(|v| v * WGK[7]).collect();
    let mut g: Vec<f64> = fc.iter().map(|v| v * WG[3]).collect();
    for j in 0..7 {
        let f1 = f(c - h * XGK[j]);
        let f2 = f(c + h * XGK[j]);
        for i in 0..n {
            k[i] += WGK[j] * (f1[i] + f2[i]);
            if j % 2 == 1 {
                g[i] += WG[j / 2] * (f1[i] + f2[i]);
            }
        }
    }
    let err = k.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) * h.abs();
    (k.into_iter().map(|v| v * h).collect(), err)
}

/// Adaptive vector-valued integral of `f` over [a, b]; `tol` is relative to
/// the largest component of a first coarse estimate.
pub fn adaptive<F: Fn(f64) -> Vec<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Vec<f64> {
    let (v, e) = gk15(f, a, b);
    let tol = tol * v.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
    let mut total = vec![0.0; v.len()];
    let mut stack = vec![(a, b, v, e, 0usize)];
    while let Some((a, b, v, e, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        if e <= tol || depth > 200 || m == a || m == b {
            for (t, x) in total.iter_mut().zip(&v) {
                *t += x;
            }
            continue;
        }
        let (v1, e1) = gk15(f, a, m);
        let (v2, e2) = gk15(f, m, b);
        stack.push((a, m, v1, e1, depth + 1));
        stack.push((m, b, v2, e2, depth + 1));
    }
    total
}

/// Scalar convenience wrapper.
pub fn adaptive1<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adaptive(&|x| vec![f(x)], a, b, tol)[0]
}

/// Jacobi polynomial P_n^{a,b}(x) by the three-term recurrence.
pub fn jacobi(n: usize, a: f64, b: f64, x: f64) -> f64 {
    let mut p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let mut p1 = 0.5 * (a - b + (a + b + 2.0) * x);
    for k in 1..n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let a1 = 2.0 * (k + 1.0) * (k + a + b + 1.0) * c;
        let a2 = (c + 1.0) * (a * a - b * b);
        let a3 = c * (c + 1.0) * (c + 2.0);
        let a4 = 2.0 * (k + a) * (k + b) * (c + 2.0);
        let p2 = ((a2 + a3 * x) * p1 - a4 * p0) / a1;
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Derivative of the order-`p_order` hierarchic C⁰ mode `p` on [−1, 1], by
/// differentiating the defining product directly.
pub fn modal_deriv(p: usize, p_order: usize, z: f64) -> f64 {
    if p == 0 {
        -0.5
    } else if p == p_order {
        0.5
    } else {
        let n = p - 1;
        let dj = if n == 0 { 0.0 } else { 0.5 * (n as f64 + 3.0) * jacobi(n - 1, 2.0, 2.0, z) };
        -0.5 * z * jacobi(n, 1.0, 1.0, z) + 0.25 * (1.0 - z * z) * dj
    }
}

/// Γ by the Lanczos approximation (g = 7, n = 9).
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut a = G[0];
        let t = x + 7.5;
        for (i, g) in G.iter().enumerate().skip(1) {
            a += g / (x + i as f64);
        }
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
    }
}

/// ∫ g(s) (s − x)^{−1−μ} ds over s − x ∈ [d0, d1], d0 > 0, via s = x + e^t.
fn kernel_integral<G: Fn(f64) -> Vec<f64>>(g: &G, x: f64, d0: f64, d1: f64, mu: f64, tol: f64) -> Vec<f64> {
    let t0 = d0.ln();
    let t1 = d1.ln();
    adaptive(
        &|t| {
            let y = t.exp();
            let w = (-mu * t).exp();
            g(x + y).into_iter().map(|v| v * w).collect()
        },
        t0,
        t1,
        tol,
    )
}

/// Memory mode ∫₋₁¹ (1−ζ)^{μ+m} (A + ζ)^{−1−μ} dζ for A > 1.
pub fn memory_mode(m: usize, mu: f64, a: f64) -> f64 {
    // ζ = −A + y: the kernel sits at ζ = −A.
    kernel_integral(&|z: f64| vec![(1.0 - z).max(0.0).powf(mu + m as f64)], -a, a - 1.0, a + 1.0, mu, 1e-15)[0]
}

/// Physical history block between a basis element `e` and a test element `t`
/// to its right:
/// B_kp = −μ/Γ(1−μ) ∫_e ψ'_p(x) ∫_t v_k(s) (s − x)^{−1−μ} ds dx,
/// v_k = (1−η)^μ P_k^{μ,−μ}(η) on the test element.
pub fn history_block(e: (f64, f64), t: (f64, f64), p_test: usize, p_basis: usize, mu: f64) -> Vec<Vec<f64>> {
    let (ae, be) = e;
    let (at, bt) = t;
    let (we, wt) = (be - ae, bt - at);
    let cst = -mu / gamma(1.0 - mu);
    let vk = |s: f64| -> Vec<f64> {
        let eta = (2.0 * (s - at) / wt - 1.0).min(1.0);
        let w = (1.0 - eta).max(0.0).powf(mu);
        (0..=p_test).map(|k| w * jacobi(k, mu, -mu, eta)).collect()
    };
    let gap = at - be;
    // x = be − we·u^β flattens the (gap + be − x)^{−μ} endpoint behaviour, which is
    // already steep for gaps well below the element width.
    let beta = if gap < 1e-2 * we { 1.0 / (1.0 - mu) } else { 1.0 };
    let outer = |u: f64| -> Vec<f64> {
        let d = we * u.powf(beta);
        let x = be - d;
        let jac = we * beta * u.powf(beta - 1.0);
        let xi = 2.0 * (x - ae) / we - 1.0;
        if gap + d <= 0.0 {
            return vec![0.0; (p_test + 1) * (p_basis + 1)];
        }
        let gk = kernel_integral(&vk, x, gap + d, gap + d + wt, mu, 1e-14);
        let mut out = Vec::with_capacity((p_test + 1) * (p_basis + 1));
        for g in &gk {
            for p in 0..=p_basis {
                out.push(cst * jac * g * modal_deriv(p, p_basis, xi) * 2.0 / we);
            }
        }
        out
    };
    let flat = adaptive(&outer, 0.0, 1.0, 1e-13);
    flat.chunks(p_basis + 1).map(|c| c.to_vec()).collect()
}
