//! Reference physics written without the library's matrix types.

use num_complex::Complex64 as C;

pub type M = [[C; 2]; 2];

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

pub fn zero() -> M {
    [[ZERO; 2]; 2]
}

pub fn eye() -> M {
    [[ONE, ZERO], [ZERO, ONE]]
}

pub fn sx() -> M {
    [[ZERO, ONE], [ONE, ZERO]]
}

pub fn sz() -> M {
    [[ONE, ZERO], [ZERO, -ONE]]
}

pub fn mul(a: &M, b: &M) -> M {
    let mut out = zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn lin(a: &M, sa: C, b: &M, sb: C) -> M {
    let mut out = zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] * sa + b[i][j] * sb;
        }
    }
    out
}

pub fn add(a: &M, b: &M) -> M {
    lin(a, ONE, b, ONE)
}

pub fn sub(a: &M, b: &M) -> M {
    lin(a, ONE, b, -ONE)
}

pub fn scale(a: &M, s: C) -> M {
    lin(a, s, &zero(), ZERO)
}

pub fn dag(a: &M) -> M {
    [[a[0][0].conj(), a[1][0].conj()], [a[0][1].conj(), a[1][1].conj()]]
}

fn comm(a: &M, b: &M) -> M {
    sub(&mul(a, b), &mul(b, a))
}

pub fn max_diff(a: &M, b: &M) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// `exp(-i (J sz + h sx) t)` from the closed form for traceless 2x2 generators.
pub fn unitary(j: f64, h: f64, t: f64) -> M {
    let w = (j * j + h * h).sqrt();
    let c = C::new((w * t).cos(), 0.0);
    let s = C::new(0.0, -(w * t).sin() / w);
    lin(&eye(), c, &lin(&sz(), C::new(j, 0.0), &sx(), C::new(h, 0.0)), s)
}

pub fn conjugate(u: &M, rho: &M) -> M {
    mul(&mul(u, rho), &dag(u))
}

#[derive(Clone, Copy)]
pub struct Vars {
    pub rho: M,
    pub oz: M,
    pub ow: M,
}

pub struct Bath {
    pub g: f64,
    pub w: f64,
    pub t: f64,
}

fn rhs(v: &Vars, h: &M, l: &M, b: &Bath) -> Vars {
    let ld = dag(l);
    let gen = sub(&scale(h, -I), &add(&mul(&ld, &v.oz), &mul(l, &v.ow)));
    let src_z = C::new(b.g * b.t * b.w / 2.0, -b.g * b.w * b.w / 2.0);
    let src_w = C::new(b.g * b.t * b.w / 2.0, 0.0);
    let doz = add(&lin(l, src_z, &v.oz, C::new(-b.w, 0.0)), &comm(&gen, &v.oz));
    let dow = add(&lin(&ld, src_w, &v.ow, C::new(-b.w, 0.0)), &comm(&gen, &v.ow));
    let r = &v.rho;
    let mut drho = scale(&comm(h, r), -I);
    drho = add(&drho, &comm(l, &mul(r, &dag(&v.oz))));
    drho = sub(&drho, &comm(&ld, &mul(&v.oz, r)));
    drho = add(&drho, &comm(&ld, &mul(r, &dag(&v.ow))));
    drho = sub(&drho, &comm(l, &mul(&v.ow, r)));
    Vars {
        rho: drho,
        oz: doz,
        ow: dow,
    }
}

fn axpy(v: &Vars, k: &Vars, s: f64) -> Vars {
    let s = C::new(s, 0.0);
    Vars {
        rho: lin(&v.rho, ONE, &k.rho, s),
        oz: lin(&v.oz, ONE, &k.oz, s),
        ow: lin(&v.ow, ONE, &k.ow, s),
    }
}

/// One control interval of the memory-operator dynamics with classic RK4.
pub fn interval(start: &Vars, j: f64, phi: f64, zeeman: f64, bath: &Bath, duration: f64, substeps: usize) -> Vars {
    let h = lin(&sz(), C::new(j, 0.0), &sx(), C::new(zeeman, 0.0));
    let l = lin(&sx(), C::new(phi.cos() / 2.0, 0.0), &sz(), C::new(phi.sin() / 2.0, 0.0));
    let dt = duration / substeps as f64;
    let mut v = *start;
    for _ in 0..substeps {
        let k1 = rhs(&v, &h, &l, bath);
        let k2 = rhs(&axpy(&v, &k1, dt / 2.0), &h, &l, bath);
        let k3 = rhs(&axpy(&v, &k2, dt / 2.0), &h, &l, bath);
        let k4 = rhs(&axpy(&v, &k3, dt), &h, &l, bath);
        let mut sum = axpy(&k1, &k2, 2.0);
        sum = axpy(&sum, &k3, 2.0);
        sum = axpy(&sum, &k4, 1.0);
        v = axpy(&v, &sum, dt / 6.0);
    }
    v
}

/// `<psi| rho |psi>`.
pub fn overlap(rho: &M, psi: [C; 2]) -> f64 {
    let mut acc = ZERO;
    for i in 0..2 {
        for j in 0..2 {
            acc += psi[i].conj() * rho[i][j] * psi[j];
        }
    }
    acc.re
}

pub fn projector(psi: [C; 2]) -> M {
    let mut out = zero();
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = psi[i] * psi[j].conj();
        }
    }
    out
}

/// Bloch-sphere ket `cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>`.
pub fn ket(theta: f64, phi: f64) -> [C; 2] {
    [
        C::new((theta / 2.0).cos(), 0.0),
        C::from_polar((theta / 2.0).sin(), phi),
    ]
}
