//! One runner per subcommand. Each returns the `result` object of the output document and
//! the sample rows for the CSV table, in a fixed order.

use rayon::prelude::*;
use serde_json::{json, Value};
use torus_spectral::energy::{
    energy_report, kernel_section_deviation, s_map, EndChart, EndSampling, SlopeEnergy,
};
use torus_spectral::kernel::{indicator, kernel_dim};
use torus_spectral::lattice::apply_symmetry;
use torus_spectral::tracer::{
    classify_double_point, genus_window_report, trace_graph, trace_path, tube_audit,
    DoublePointReport, SpectrumSample,
};
use torus_spectral::{enumerate_dual, Error, Symmetry};

use crate::config::{cx, JobConfig, Setup};
use crate::emit::{pair, Row};

pub type Output = (Value, Vec<Row>);

fn error_value(e: &Error) -> Value {
    json!({ "kind": e.kind(), "message": e.to_string() })
}

fn sample_value(s: &SpectrumSample<f64>) -> Value {
    json!({
        "a": pair(s.a),
        "b": pair(s.b),
        "sigma_min": s.sigma_min,
        "kernel_dim": s.kernel_dim,
        "branch_tag": s.tag.as_str(),
    })
}

fn report_value(r: &DoublePointReport<f64>) -> Value {
    json!({
        "location": { "a": pair(r.location.0), "b": pair(r.location.1) },
        "verdict": r.verdict.as_str(),
        "zeros": r.zeros.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "node": r.node.map(|(a, b)| json!({ "a": pair(a), "b": pair(b) })),
        "kernel_dim": r.kernel_dim,
        "multiplier_defect": r.multiplier_defect,
        "multiplier_real": r.multiplier_real,
        "radius": r.radius,
        "min_weight": r.min_weight,
        "note": r.note,
    })
}

fn classified(c2: torus_spectral::Complex64, c1: torus_spectral::Complex64, r: &torus_spectral::Result<DoublePointReport<f64>>) -> Value {
    let mut v = json!({ "c_pair": [pair(c2), pair(c1)] });
    match r {
        Ok(r) => v["report"] = report_value(r),
        Err(e) => v["error"] = error_value(e),
    }
    v
}

pub fn vacuum(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let pts = enumerate_dual(s.dirac.dual(), cfg.vacuum.window_radius);
    let lines: Vec<Value> = pts
        .iter()
        .flat_map(|&c| {
            [
                json!({ "species": "v", "index": pair(c), "line": "b", "value": pair(c) }),
                json!({ "species": "w", "index": pair(c), "line": "a", "value": pair(c.conj()) }),
            ]
        })
        .collect();
    let double_points: Vec<Value> = pts
        .iter()
        .flat_map(|&c2| {
            pts.iter().map(move |&c1| {
                json!({ "c_pair": [pair(c2), pair(c1)], "a": pair(c2.conj()), "b": pair(c1) })
            })
        })
        .collect();
    Ok((
        json!({
            "window_radius": cfg.vacuum.window_radius,
            "dual_points": pts.iter().map(|&c| pair(c)).collect::<Vec<_>>(),
            "lines": lines,
            "double_points": double_points,
        }),
        vec![],
    ))
}

pub fn indicator_sweep(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.indicator;
    let axis = |r: [f64; 2], n: usize, k: usize| {
        if n == 1 {
            r[0]
        } else {
            r[0] + (r[1] - r[0]) * k as f64 / (n - 1) as f64
        }
    };
    let points: Vec<(usize, usize)> = (0..j.n_u).flat_map(|i| (0..j.n_v).map(move |k| (i, k))).collect();
    let rows: Vec<Row> = points
        .par_iter()
        .map(|&(i, k)| {
            let (u, v) = (axis(j.u_range, j.n_u, i), axis(j.v_range, j.n_v, k));
            let a = cx(j.origin.a) + cx(j.u.a) * u + cx(j.v.a) * v;
            let b = cx(j.origin.b) + cx(j.u.b) * u + cx(j.v.b) * v;
            let ind = indicator(&s.dirac, a, b)?;
            let kd = kernel_dim(&s.dirac, a, b, s.tol.ker_tol)?;
            Ok(Row { a, b, sigma_min: ind.sigma_min, kernel_dim: kd, branch_tag: "grid".into() })
        })
        .collect::<Result<_, Error>>()?;
    let min = rows.iter().map(|r| r.sigma_min).fold(f64::INFINITY, f64::min);
    Ok((
        json!({
            "grid": [j.n_u, j.n_v],
            "points": rows.len(),
            "min_sigma": min,
            "kernel_points": rows.iter().filter(|r| r.kernel_dim > 0).count(),
        }),
        rows,
    ))
}

pub fn trace(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.trace;
    let samples = trace_graph(&s.dirac, j.plane.to_core(), j.region.to_core(), j.step, j.eps, &s.tol)?;
    let audit = tube_audit(&samples, j.eps, s.dirac.dual(), 1.0);
    Ok((
        json!({
            "plane": j.plane,
            "samples": samples.iter().map(sample_value).collect::<Vec<_>>(),
            "tube": { "checked": audit.checked, "violations": audit.violations, "max_distance": audit.max_distance },
        }),
        samples.iter().map(Row::from).collect(),
    ))
}

pub fn classify(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.classify;
    let pairs: Vec<_> = if j.pairs.is_empty() {
        let pts = enumerate_dual(s.dirac.dual(), j.window_radius);
        pts.iter().flat_map(|&c2| pts.iter().map(move |&c1| (c2, c1))).collect()
    } else {
        j.pairs.iter().map(|p| (cx(p[0]), cx(p[1]))).collect()
    };
    let reports: Vec<Value> = pairs
        .par_iter()
        .map(|&(c2, c1)| {
            let r = classify_double_point(&s.dirac, &s.lattice, (c2, c1), j.eps, &s.tol, &s.classifier);
            classified(c2, c1, &r)
        })
        .collect();
    Ok((json!({ "eps": j.eps, "reports": reports }), vec![]))
}

pub fn genus(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.genus;
    let g = genus_window_report(&s.dirac, &s.lattice, j.window_radius, j.eps, &s.tol, &s.classifier);
    Ok((
        json!({
            "window_radius": g.window_radius,
            "eps": g.eps,
            "handles": g.handles,
            "nodes": g.nodes,
            "indeterminate": g.indeterminate,
            "failures": g.failures,
            "note": g.note,
            "reports": g.reports.iter().map(|(c2, c1, r)| classified(*c2, *c1, r)).collect::<Vec<_>>(),
        }),
        vec![],
    ))
}

fn chart_value(c: &EndChart<f64>) -> Value {
    json!({
        "fit": c.fit.iter().map(|z| pair(*z)).collect::<Vec<_>>(),
        "residual": c.residual,
        "samples": c.samples,
    })
}

fn slope_value(s: &SlopeEnergy<f64>) -> Value {
    json!({
        "value": s.value,
        "lambda": pair(s.lambda),
        "imag_ratio": s.imag_ratio,
        "warning": s.warning,
    })
}

pub fn energy(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.energy;
    let opts = EndSampling {
        inner_radius: j.inner_radius,
        radii: j.radii,
        rays: j.rays,
        eps: j.eps,
        degree: j.degree,
    };
    let r = energy_report(&s.dirac, &s.lattice, &opts, &s.tol)?;
    Ok((
        json!({
            "covolume": s.lattice.covolume(),
            "direct": r.direct,
            "slope_o": slope_value(&r.slope_o),
            "slope_infinity": slope_value(&r.slope_infinity),
            "residue": {
                "at_infinity": r.residue.at_infinity,
                "at_o": r.residue.at_o,
                "from_periods": r.residue.from_periods,
                "imag": r.residue.imag,
            },
            "max_relative_spread": r.max_relative_spread(),
            "chart_o": chart_value(&r.chart_o),
            "chart_infinity": chart_value(&r.chart_infinity),
        }),
        vec![],
    ))
}

pub fn section(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.section;
    let path: Vec<_> = j.path.iter().map(|p| cx(*p)).collect();
    let samples = trace_path(&s.dirac, j.plane.to_core(), &path, j.eps, &s.tol)?;
    let mut out = Vec::with_capacity(samples.len());
    for smp in &samples {
        let dev = kernel_section_deviation(&s.dirac, smp, &s.tol)?;
        let s_values: Vec<Value> = j
            .torus_points
            .iter()
            .map(|p| match s_map(&s.dirac, smp, cx(*p), &s.tol) {
                Ok(q) => json!({ "p": p, "ratio": [pair(q.first), pair(q.second)] }),
                Err(e) => json!({ "p": p, "error": error_value(&e) }),
            })
            .collect();
        out.push(json!({
            "sample": sample_value(smp),
            "dev_o": dev.dev_o,
            "dev_infinity": dev.dev_infinity,
            "wiener_norm": dev.psi.wiener_norm(),
            "s_map": s_values,
        }));
    }
    Ok((json!({ "sections": out }), samples.iter().map(Row::from).collect()))
}

pub fn audit(cfg: &JobConfig, s: &Setup) -> Result<Output, Error> {
    let j = &cfg.audit;
    let dual = s.dirac.dual();
    let samples = trace_graph(&s.dirac, j.plane.to_core(), j.region.to_core(), j.step, j.eps, &s.tol)?;
    let tube = tube_audit(&samples, j.eps, dual, j.core_cells);
    let [c1, c2] = dual.basis();
    let mut symmetry = Vec::with_capacity(samples.len());
    let (mut rho_max, mut gauge_max) = (0.0f64, 0.0f64);
    for smp in &samples {
        let p = (smp.a, smp.b);
        let base = indicator(&s.dirac, p.0, p.1)?.sigma_min;
        let r = apply_symmetry(Symmetry::Reality, p, dual)?;
        let rho = (indicator(&s.dirac, r.0, r.1)?.sigma_min - base).abs();
        let mut gauge = 0.0f64;
        for c in [c1, c2] {
            let g = apply_symmetry(Symmetry::Gauge(c), p, dual)?;
            gauge = gauge.max((indicator(&s.dirac, g.0, g.1)?.sigma_min - base).abs());
        }
        rho_max = rho_max.max(rho);
        gauge_max = gauge_max.max(gauge);
        symmetry.push(json!({ "rho": rho, "gauge": gauge }));
    }
    Ok((
        json!({
            "tube": {
                "eps": j.eps,
                "core_cells": j.core_cells,
                "checked": tube.checked,
                "violations": tube.violations,
                "max_distance": tube.max_distance,
            },
            "symmetry": { "rho_max": rho_max, "gauge_max": gauge_max, "per_sample": symmetry },
        }),
        samples.iter().map(Row::from).collect(),
    ))
}
