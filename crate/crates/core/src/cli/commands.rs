use std::sync::Arc;
use std::time::Instant;

use serde_json::json;

use super::config::{ExtendMode, Prepared, Quantity};
use super::report::{Cell, Report};
use super::CliError;
use crate::error::{Error, Result};
use crate::extension::{
    extension_norm_ratio, ii_new_ratio, lower_window, solve_coefficients, AngularExtension, EpigraphExtension,
    ExtensionCoeffs, ExtensionKind,
};
use crate::fields::{rigid_generators, BasisSet, CutoffProduct, FieldSpec, ScalarField, StripCutoff};
use crate::geometry::{
    build_whitney_cover, check_whitney_cover, BoxRegion, CellShape, Domain, DomainKind, EpiWindow, Formula, Isometry,
    LipschitzFn, Side,
};
use crate::korn::{
    assemble_gram, estimate_korn1_constant, estimate_korn2_constant, korn2_random_search, korn_poincare_constant,
    korn_poincare_scaling, solve_peridynamic, ConstantEstimate, ConstantName, GramForms, Korn2Method, Method,
};
use crate::quadrature::{convergence_study, default_depth, Grid};
use crate::seminorms::{gagliardo, hardy_ratio, lp_norm, perienergy, projected, FracParams, RATIO_GUARD};

type CmdResult<T> = std::result::Result<T, CliError>;

/// Attach the name of the failing operation to a numerical error.
fn op<T>(r: Result<T>, what: impl FnOnce() -> String) -> CmdResult<T> {
    r.map_err(|e| match e {
        Error::Config(m) => CliError::config(m),
        e => CliError::numeric(format!("{}: {e}", what())),
    })
}

fn field_kind(spec: &FieldSpec) -> String {
    serde_json::to_value(spec)
        .ok()
        .and_then(|v| v.get("kind").and_then(|k| k.as_str()).map(String::from))
        .unwrap_or_default()
}

fn grid(prep: &Prepared, domain: &Domain, h: f64, default: usize) -> CmdResult<Grid> {
    let depth = prep.config.grid.depth.unwrap_or(default);
    op(Grid::new(domain, h, Isometry::identity(domain.dim()), depth), || format!("grid at h = {h}"))
}

fn need_fields(prep: &Prepared) -> CmdResult<()> {
    if prep.fields.is_empty() {
        return Err(CliError::config("fields: this subcommand needs at least one field"));
    }
    Ok(())
}

fn secs(t: Instant) -> Cell {
    Cell::Num(t.elapsed().as_secs_f64())
}

pub fn seminorm(prep: &Prepared) -> CmdResult<Report> {
    need_fields(prep)?;
    let p = prep.params;
    let mut r = Report::new(
        "seminorm",
        &["field", "kind", "s", "p", "h", "cells", "gagliardo", "projected", "lp_norm", "ratio", "runtime_s"],
    );
    for &h in &prep.config.grid.h {
        let g = grid(prep, &prep.domain, h, default_depth(p.n))?;
        for (i, u) in prep.fields.iter().enumerate() {
            let t = Instant::now();
            let w = op(gagliardo(u, &g, p), || format!("gagliardo seminorm of fields[{i}] at h = {h}"))?;
            let x = op(projected(u, &g, p), || format!("projected seminorm of fields[{i}] at h = {h}"))?;
            let l = op(lp_norm(u, &g, p.p), || format!("Lp norm of fields[{i}] at h = {h}"))?;
            let ratio = (w.raw >= RATIO_GUARD).then(|| x.value / w.value);
            r.push(vec![
                i.into(),
                field_kind(&u.spec).into(),
                p.s.into(),
                p.p.into(),
                h.into(),
                g.len().into(),
                w.value.into(),
                x.value.into(),
                l.into(),
                ratio.into(),
                secs(t),
            ]);
        }
    }
    Ok(r)
}

pub fn convergence(prep: &Prepared) -> CmdResult<Report> {
    need_fields(prep)?;
    let hs = &prep.config.grid.h;
    if hs.len() < 3 {
        return Err(CliError::config("grid.h: a convergence study needs at least three grid sizes"));
    }
    let ratio = hs[0] / hs[1];
    if hs.windows(2).any(|w| !(w[1] < w[0]) || ((w[0] / w[1]) - ratio).abs() > 1e-9 * ratio) {
        return Err(CliError::config("grid.h: grid sizes must decrease geometrically"));
    }
    let quantity = prep.config.convergence.clone().unwrap_or_default().quantity;
    let p = prep.params;
    let qname = match quantity {
        Quantity::Gagliardo => "gagliardo",
        Quantity::Projected => "projected",
        Quantity::Lp => "lp",
        Quantity::Perienergy => "perienergy",
    };
    let mut r = Report::new(
        "convergence",
        &["field", "kind", "quantity", "row", "h", "value", "order", "fitted_order", "monotone", "runtime_s"],
    );
    for (i, u) in prep.fields.iter().enumerate() {
        let t = Instant::now();
        let mut times = Vec::new();
        let table = op(
            convergence_study(hs, |h| {
                let t = Instant::now();
                let g = Grid::new(&prep.domain, h, Isometry::identity(p.n), prep.config.grid.depth.unwrap_or(default_depth(p.n)))?;
                let v = match quantity {
                    Quantity::Gagliardo => gagliardo(u, &g, p)?.value,
                    Quantity::Projected => projected(u, &g, p)?.value,
                    Quantity::Lp => lp_norm(u, &g, p.p)?,
                    Quantity::Perienergy => perienergy(u, &g, p.s)?,
                };
                times.push(t.elapsed().as_secs_f64());
                Ok(v)
            }),
            || format!("{qname} convergence study of fields[{i}]"),
        )?;
        let kind = field_kind(&u.spec);
        for (row, dt) in table.rows.iter().zip(&times) {
            r.push(vec![
                i.into(),
                kind.clone().into(),
                qname.into(),
                "h".into(),
                row.h.into(),
                row.value.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Num(*dt),
            ]);
        }
        r.push(vec![
            i.into(),
            kind.into(),
            qname.into(),
            "extrapolate".into(),
            Cell::Empty,
            table.extrapolate.into(),
            table.order.into(),
            table.fitted_order.into(),
            table.monotone.into(),
            secs(t),
        ]);
    }
    Ok(r)
}

enum ExtDomain {
    Graph(LipschitzFn),
    Wedge(f64),
}

fn ext_domain(d: &Domain) -> CmdResult<ExtDomain> {
    match &d.kind {
        DomainKind::HalfSpaceTrunc(_) => Ok(ExtDomain::Graph(LipschitzFn::zero(d.dim()))),
        DomainKind::Epigraph { f, side: Side::Upper, .. } => Ok(ExtDomain::Graph(f.clone())),
        DomainKind::Angular { alpha, side: Side::Upper, .. } => Ok(ExtDomain::Wedge(*alpha)),
        _ => Err(CliError::config(format!(
            "domain: {} has no extension; use half-space, an upper epigraph or angular",
            d.name()
        ))),
    }
}

fn coefficients(m_lip: f64, n: usize, c2: f64, variant: crate::extension::DeltaVariant, delta: Option<f64>) -> CmdResult<ExtensionCoeffs> {
    let r = match delta {
        Some(d) => ExtensionCoeffs::with_delta(m_lip, d),
        None => solve_coefficients(m_lip, n, c2, variant),
    };
    r.map_err(|e| CliError::config(format!("extend: {e}")))
}

pub fn extend(prep: &Prepared) -> CmdResult<Report> {
    need_fields(prep)?;
    let opts = prep.config.extend.clone().unwrap_or_default();
    let d = &prep.domain;
    let n = d.dim();
    let shape = ext_domain(d)?;
    let m_lip = match &shape {
        ExtDomain::Graph(f) => f.lipschitz(),
        ExtDomain::Wedge(alpha) => alpha.abs(),
    };
    let coeffs = coefficients(m_lip, n, opts.c2, opts.delta_variant, opts.delta)?;
    match opts.mode {
        ExtendMode::Points => extend_points(prep, &shape, &coeffs, opts.points, opts.drop_alpha_term),
        ExtendMode::Ratio => extend_ratio(prep, &shape, &coeffs, opts.drop_alpha_term),
    }
}

fn extend_points(prep: &Prepared, shape: &ExtDomain, coeffs: &ExtensionCoeffs, points: usize, drop: bool) -> CmdResult<Report> {
    if points < 2 {
        return Err(CliError::config("extend.points: need at least 2 points per axis"));
    }
    let d = &prep.domain;
    let n = d.dim();
    let lower = op(lower_window(d, coeffs.mu), || "lower window".into())?;
    let (bu, bl) = (d.bounding_box(), lower.bounding_box());
    let lo: Vec<f64> = (0..n).map(|k| bu.lo[k].min(bl.lo[k])).collect();
    let hi: Vec<f64> = (0..n).map(|k| bu.hi[k].max(bl.hi[k])).collect();
    let mut cols: Vec<String> = vec!["field".into(), "region".into()];
    cols.extend((0..n).map(|k| format!("x{k}")));
    cols.extend((0..n).map(|k| format!("e{k}")));
    let colref: Vec<&str> = cols.iter().map(|s| s.as_str()).collect();
    let mut r = Report::new("extend", &colref);
    for (i, u) in prep.fields.iter().enumerate() {
        let eval: Box<dyn Fn(&[f64]) -> Result<Vec<f64>>> = match shape {
            ExtDomain::Graph(f) => {
                let e = EpigraphExtension::new(u, f.clone(), *coeffs).with_field_domain(d.clone());
                Box::new(move |x| e.try_eval(x))
            }
            ExtDomain::Wedge(alpha) => {
                let mut e = AngularExtension::new(u, *alpha, *coeffs).with_field_domain(d.clone());
                if drop {
                    e = e.without_alpha_term();
                }
                Box::new(move |x| e.try_eval(x))
            }
        };
        for lin in 0..points.pow(n as u32) {
            let mut rem = lin;
            let x: Vec<f64> = (0..n)
                .map(|k| {
                    let j = rem % points;
                    rem /= points;
                    lo[k] + (hi[k] - lo[k]) * j as f64 / (points - 1) as f64
                })
                .collect();
            let region = if d.contains(&x) {
                "D"
            } else if lower.contains(&x) {
                "D-"
            } else {
                continue;
            };
            let e = op(eval(&x), || format!("extension of fields[{i}] at {x:?}"))?;
            let mut row: Vec<Cell> = vec![i.into(), region.into()];
            row.extend(x.iter().map(|&v| Cell::Num(v)));
            row.extend(e.iter().map(|&v| Cell::Num(v)));
            r.push(row);
        }
    }
    Ok(r)
}

fn extend_ratio(prep: &Prepared, shape: &ExtDomain, c: &ExtensionCoeffs, drop: bool) -> CmdResult<Report> {
    let p = prep.params;
    let mut r = Report::new(
        "extend",
        &[
            "field", "kind", "h", "m_lip", "delta", "lambda", "mu", "k", "l", "m", "q", "upper", "lower", "mixed",
            "extended", "u_x", "context", "ratio", "ratio_power", "ii_new", "ii_new_ratio", "runtime_s",
        ],
    );
    for &h in &prep.config.grid.h {
        for (i, u) in prep.fields.iter().enumerate() {
            let t = Instant::now();
            let kind = match shape {
                ExtDomain::Graph(_) => ExtensionKind::Epigraph,
                ExtDomain::Wedge(_) => ExtensionKind::Angular { drop_alpha_term: drop },
            };
            let e = op(extension_norm_ratio(u, &prep.domain, c, kind, h, p), || {
                format!("extension norm ratio of fields[{i}] at h = {h}")
            })?;
            let (ii, ii_ratio) = match shape {
                ExtDomain::Wedge(_) => {
                    let v = op(ii_new_ratio(u, &prep.domain, c, h, p), || format!("wedge mixed term of fields[{i}] at h = {h}"))?;
                    (Cell::Num(v.value), Cell::from(v.ratio))
                }
                ExtDomain::Graph(_) => (Cell::Empty, Cell::Empty),
            };
            r.push(vec![
                i.into(),
                field_kind(&u.spec).into(),
                h.into(),
                c.m_lip.into(),
                c.delta.into(),
                c.lambda.into(),
                c.mu.into(),
                c.k.into(),
                c.l.into(),
                c.m.into(),
                c.q.into(),
                e.split.upper.into(),
                e.split.lower.into(),
                e.split.mixed.into(),
                e.extended.into(),
                e.u_x.into(),
                e.context.into(),
                e.ratio.into(),
                e.ratio_power.into(),
                ii,
                ii_ratio,
                secs(t),
            ]);
        }
    }
    Ok(r)
}

pub fn hardy(prep: &Prepared) -> CmdResult<Report> {
    need_fields(prep)?;
    let opts = prep.config.hardy.clone().unwrap_or_default();
    let d = &prep.domain;
    let f = d
        .graph()
        .filter(|_| !matches!(d.kind, DomainKind::Angular { .. } | DomainKind::Box(_)))
        .ok_or_else(|| CliError::config(format!("domain: {} has no boundary graph", d.name())))?;
    let (lambda, mu) = match (opts.lambda, opts.mu) {
        (Some(l), Some(m)) if 0.0 <= l && l < m => (l, m),
        (None, None) => {
            let c = coefficients(f.lipschitz(), d.dim(), opts.c2, opts.delta_variant, None)?;
            (c.lambda, c.mu)
        }
        _ => return Err(CliError::config("hardy: give both lambda and mu with 0 <= lambda < mu, or neither")),
    };
    let p = prep.params;
    let mut r = Report::new(
        "hardy",
        &["field", "kind", "h", "lambda", "mu", "lhs", "denominator", "ratio", "guarded", "enlargements", "runtime_s"],
    );
    for &h in &prep.config.grid.h {
        for (i, u) in prep.fields.iter().enumerate() {
            let t = Instant::now();
            let hr = op(hardy_ratio(u, lambda, mu, d, h, p), || format!("Hardy ratio of fields[{i}] at h = {h}"))?;
            r.push(vec![
                i.into(),
                field_kind(&u.spec).into(),
                h.into(),
                lambda.into(),
                mu.into(),
                hr.lhs.into(),
                hr.denominator.into(),
                Cell::Num(hr.ratio.unwrap_or(f64::INFINITY)),
                hr.ratio.is_none().into(),
                hr.enlargements.into(),
                secs(t),
            ]);
        }
    }
    Ok(r)
}

pub fn cover(prep: &Prepared) -> CmdResult<Report> {
    let opts = prep.config.cover.clone().unwrap_or_default();
    let d = &prep.domain;
    if !(opts.min_side > 0.0) {
        return Err(CliError::config("cover.min_side: must be positive"));
    }
    let c = op(build_whitney_cover(d, opts.min_side), || format!("Whitney cover of {}", d.name()))?;
    let chk = check_whitney_cover(&c, d, opts.samples_per_cell, prep.config.seed);
    let mut r = Report::new(
        "cover",
        &["cell", "generation", "side", "anchor_x", "anchor_y", "shape", "alpha", "clipped"],
    );
    for (i, cell) in c.cells.iter().enumerate() {
        let (shape, alpha) = match cell.shape {
            CellShape::Cube => ("cube", Cell::Empty),
            CellShape::Parallelogram { alpha } => ("parallelogram", Cell::Num(alpha)),
        };
        r.push(vec![
            i.into(),
            Cell::Int(cell.generation as i64),
            cell.side.into(),
            cell.anchor[0].into(),
            cell.anchor[1].into(),
            shape.into(),
            alpha,
            cell.clipped.into(),
        ]);
    }
    let passed = chk.passed(12);
    r.meta.insert(
        "summary".into(),
        json!({
            "cells": c.cells.len(),
            "c1": c.c1,
            "c2": c.c2,
            "lipschitz": c.m(),
            "max_interior_overlap": chk.max_interior_overlap,
            "uncovered_fraction": chk.uncovered_fraction,
            "doubled_outside": chk.doubled_outside,
            "distance_violations": chk.distance_violations,
            "distance_samples": chk.distance_samples,
            "ratio_min": chk.ratio_range.0,
            "ratio_max": chk.ratio_range.1,
            "passed": passed,
        }),
    );
    eprintln!(
        "cover: {} cells, c1 = {}, c2 = {:.4}, overlap {}, doubled outside {}, distance violations {}/{}, {}",
        c.cells.len(),
        c.c1,
        c.c2,
        chk.max_interior_overlap,
        chk.doubled_outside,
        chk.distance_violations,
        chk.distance_samples,
        if passed { "all invariants hold" } else { "INVARIANTS VIOLATED" }
    );
    Ok(r)
}

fn korn_row(r: &mut Report, e: &ConstantEstimate, lambda: f64, tau: Cell, m_lip: Cell, cond: Cell, t: Instant) {
    let name = serde_json::to_value(e.name).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    let method = serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    r.push(vec![
        name.into(),
        e.h.into(),
        e.degree.into(),
        method.into(),
        tau,
        m_lip,
        e.value.into(),
        lambda.into(),
        e.lower_bound.into(),
        e.error_indicator.into(),
        cond,
        secs(t),
    ]);
}

fn estimate(
    name: ConstantName,
    method: Method,
    forms: Option<&GramForms>,
    basis: &Arc<BasisSet>,
    degree: usize,
    g: &Grid,
    p: FracParams,
    samples: usize,
    seed: u64,
) -> Result<(ConstantEstimate, f64)> {
    let sub = forms.map(|f| f.restrict(degree));
    let need = || Error::InvalidInput("Gram forms unavailable".into());
    match (name, method) {
        (ConstantName::C2, Method::RandomSearch) if p.p != 2.0 => {
            let b = Arc::new(basis.restrict(degree).0);
            let e = korn2_random_search(b, g, p, samples, seed)?;
            let v = e.value;
            Ok((e, v))
        }
        (ConstantName::C2, Method::RandomSearch) => {
            let e = estimate_korn2_constant(sub.as_ref().ok_or_else(need)?, Korn2Method::RandomSearch { samples, seed })?;
            Ok((e.estimate, e.lambda))
        }
        (ConstantName::C2, _) => {
            let e = estimate_korn2_constant(sub.as_ref().ok_or_else(need)?, Korn2Method::Eig)?;
            Ok((e.estimate, e.lambda))
        }
        (ConstantName::C1, _) => {
            let e = estimate_korn1_constant(sub.as_ref().ok_or_else(need)?)?;
            Ok((e.estimate, e.lambda))
        }
        (ConstantName::KornPoincare, _) => {
            let e = korn_poincare_constant(sub.as_ref().ok_or_else(need)?)?;
            Ok((e.estimate, e.lambda))
        }
        (other, _) => Err(Error::InvalidInput(format!("{other:?} is not a Korn constant"))),
    }
}

pub fn korn_constant(prep: &Prepared) -> CmdResult<Report> {
    let opts = prep.config.korn.clone().unwrap_or_default();
    let p = prep.params;
    let n = p.n;
    let bbox = prep.domain.bounding_box();
    let maxdeg = *opts.degrees.iter().max().expect("validated degrees");
    if let Some(taus) = &opts.taus {
        if !matches!(prep.domain.kind, DomainKind::Box(_)) || p.p != 2.0 || taus.len() < 2 {
            return Err(CliError::config("korn.taus: the scaling study needs a box domain, p = 2 and two or more factors"));
        }
    }
    if opts.m_sweep.is_some() && n != 2 {
        return Err(CliError::config("korn.m_sweep: planar domains only"));
    }
    let mut r = Report::new(
        "korn-constant",
        &[
            "name", "h", "degree", "method", "tau", "m_lip", "value", "lambda", "lower_bound", "error_indicator",
            "mass_condition", "runtime_s",
        ],
    );
    let gram_needed = p.p == 2.0;
    let basis = Arc::new(BasisSet::cosine(bbox.clone(), maxdeg, true));
    let mut previous: Vec<Option<f64>> = vec![None; opts.degrees.len() * opts.constants.len()];
    for &h in &prep.config.grid.h {
        let t = Instant::now();
        let g = grid(prep, &prep.domain, h, 2)?;
        let forms = if gram_needed {
            Some(op(assemble_gram(basis.clone(), &g, p), || format!("Gram assembly at h = {h}"))?)
        } else {
            None
        };
        let cond = forms.as_ref().map(|f| f.mass_condition()).into();
        let mut slot = 0;
        for &deg in &opts.degrees {
            for &name in &opts.constants {
                let (mut e, lambda) = op(
                    estimate(name, opts.method, forms.as_ref(), &basis, deg, &g, p, opts.samples, prep.config.seed),
                    || format!("{name:?} estimate at h = {h}, degree {deg}"),
                )?;
                e.error_indicator = previous[slot].map(|v| ((e.value - v) / e.value).abs());
                previous[slot] = Some(e.value);
                slot += 1;
                korn_row(&mut r, &e, lambda, Cell::Empty, Cell::Empty, Cell::clone(&cond), t);
            }
        }
    }
    let h0 = prep.config.grid.h[0];
    let depth = prep.config.grid.depth.unwrap_or(2);
    if let Some(taus) = &opts.taus {
        let t = Instant::now();
        let fit = op(korn_poincare_scaling(&bbox, taus, h0, false, depth, maxdeg, p), || {
            "Korn-Poincare scaling study".to_string()
        })?;
        for (tau, v) in fit.taus.iter().zip(&fit.values) {
            let e = ConstantEstimate {
                name: ConstantName::KornPoincare,
                value: *v,
                h: h0,
                degree: maxdeg,
                method: Method::Eig,
                error_indicator: None,
                lower_bound: false,
            };
            korn_row(&mut r, &e, v * v, Cell::Num(*tau), Cell::Empty, Cell::Empty, t);
        }
        r.meta.insert("korn_poincare_exponent".into(), json!(fit.exponent));
        eprintln!("korn-poincare scaling exponent {:.4} (expected s = {})", fit.exponent, p.s);
    }
    if let Some(ms) = &opts.m_sweep {
        for &m in ms {
            let t = Instant::now();
            let f = LipschitzFn::analytic(Formula::Abs { center: 0.5, slope: m });
            let d = op(
                Domain::epigraph(f, EpiWindow::Band { lo: vec![0.0], hi: vec![1.0], height: 1.0 }, Side::Upper),
                || format!("band window for M = {m}"),
            )?;
            let g = grid(prep, &d, h0, 2)?;
            let b = Arc::new(BasisSet::cosine(d.bounding_box(), maxdeg, true));
            let forms = if gram_needed {
                Some(op(assemble_gram(b.clone(), &g, p), || format!("Gram assembly for M = {m}"))?)
            } else {
                None
            };
            let method = if gram_needed { opts.method } else { Method::RandomSearch };
            let (e, lambda) = op(
                estimate(ConstantName::C2, method, forms.as_ref(), &b, maxdeg, &g, p, opts.samples, prep.config.seed),
                || format!("C2 estimate for M = {m}"),
            )?;
            let cond = forms.as_ref().map(|f| f.mass_condition()).into();
            korn_row(&mut r, &e, lambda, Cell::Empty, Cell::Num(m), cond, t);
        }
    }
    Ok(r)
}

pub fn perisolve(prep: &Prepared) -> CmdResult<Report> {
    let opts = prep
        .config
        .perisolve
        .clone()
        .ok_or_else(|| CliError::config("perisolve: missing [perisolve] section"))?;
    let p = prep.params;
    let n = p.n;
    if p.p != 2.0 {
        return Err(CliError::config("params.p: the peridynamic energy needs p = 2"));
    }
    if opts.clamp_axis >= n || !(opts.transition > 0.0) {
        return Err(CliError::config("perisolve: clamp_axis out of range or transition not positive"));
    }
    let bbox = prep.domain.bounding_box();
    let ax = opts.clamp_axis;
    if !(opts.clamp_at > bbox.lo[ax] && opts.clamp_at < bbox.hi[ax]) {
        return Err(CliError::config("perisolve.clamp_at: must lie inside the domain"));
    }
    let load = crate::fields::field_library(&opts.load, n).map_err(|e| CliError::config(format!("perisolve.load: {e}")))?;
    let mut hi = bbox.hi.clone();
    hi[ax] = opts.clamp_at;
    let omega = BoxRegion::new(bbox.lo.clone(), hi).map_err(|e| CliError::config(format!("perisolve: {e}")))?;
    let cut = Arc::new(StripCutoff { axis: ax, start: opts.clamp_at, width: opts.transition });
    let basis = Arc::new(BasisSet::cosine(bbox, opts.degree, true).with_cutoff(cut));
    let h = prep.config.grid.h[0];
    let t = Instant::now();
    let g = grid(prep, &prep.domain, h, 2)?;
    let sol = op(solve_peridynamic(&load, &omega, basis.clone(), &g, p.s), || "peridynamic Galerkin solve".into())?;
    let u = sol.field();
    let energy_direct = op(perienergy(&u, &g, p.s), || "peridynamic energy of the minimizer".into())?;
    let mut r = Report::new("perisolve", &["quantity", "index", "value"]);
    let mut put = |q: &str, i: Cell, v: Cell| r.push(vec![q.into(), i, v]);
    put("h", Cell::Empty, h.into());
    put("s", Cell::Empty, p.s.into());
    put("basis_size", Cell::Empty, basis.len().into());
    put("energy", Cell::Empty, sol.energy.into());
    put("elastic_energy", Cell::Empty, energy_direct.into());
    put("residual", Cell::Empty, sol.residual.into());
    put("load_norm", Cell::Empty, sol.load.norm().into());
    for (i, c) in sol.coeffs.iter().enumerate() {
        put("coefficient", i.into(), (*c).into());
    }
    put("runtime_s", Cell::Empty, secs(t));
    Ok(r)
}

/// `min(1, dist(x, ∂B)/ε)` for a box `B`, zero outside.
struct BoxRamp {
    region: BoxRegion,
    eps: f64,
}

impl ScalarField for BoxRamp {
    fn value(&self, x: &[f64]) -> f64 {
        let d = x
            .iter()
            .enumerate()
            .map(|(k, v)| (v - self.region.lo[k]).min(self.region.hi[k] - v))
            .fold(f64::INFINITY, f64::min);
        (d / self.eps).clamp(0.0, 1.0)
    }
}

pub fn probe(prep: &Prepared) -> CmdResult<Report> {
    let opts = prep
        .config
        .probe
        .clone()
        .ok_or_else(|| CliError::config("probe: missing [probe] section with eps = [...]"))?;
    if opts.eps.is_empty() || opts.eps.iter().any(|e| !(*e > 0.0)) {
        return Err(CliError::config("probe.eps: need positive ramp widths"));
    }
    let p = prep.params;
    let n = p.n;
    let bbox = prep.domain.bounding_box();
    if !matches!(prep.domain.kind, DomainKind::Box(_)) {
        return Err(CliError::config("probe-ps-lt-1: needs a box domain"));
    }
    let rotation = rigid_generators(n, &bbox.center()).swap_remove(n);
    let mut r = Report::new(
        "probe-ps-lt-1",
        &["eps", "h", "ps", "gagliardo", "projected", "ratio", "resolved", "runtime_s"],
    );
    for &eps in &opts.eps {
        let u = CutoffProduct { inner: &rotation, cutoff: BoxRamp { region: bbox.clone(), eps } };
        for &h in &prep.config.grid.h {
            let t = Instant::now();
            let g = grid(prep, &prep.domain, h, default_depth(n))?;
            let w = op(gagliardo(&u, &g, p), || format!("gagliardo seminorm at eps = {eps}, h = {h}"))?;
            let x = op(projected(&u, &g, p), || format!("projected seminorm at eps = {eps}, h = {h}"))?;
            let ratio = (x.raw >= RATIO_GUARD).then(|| w.value / x.value);
            r.push(vec![
                eps.into(),
                h.into(),
                (p.p * p.s).into(),
                w.value.into(),
                x.value.into(),
                Cell::Num(ratio.unwrap_or(f64::INFINITY)),
                (eps >= 2.0 * h).into(),
                secs(t),
            ]);
        }
    }
    Ok(r)
}
