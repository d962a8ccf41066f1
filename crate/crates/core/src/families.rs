//! Parameterized domain families.

use crate::domain::{normalize_domain, BoundaryFunctionPair, ConvexDomain, Curve, RawDomain};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, Point};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    /// `[0, a] x [0, 1]`
    Rectangle,
    /// `|x| <= A`, `|y - 1/2| <= sqrt(1 - (x/A)^2) / 2`
    Ellipse,
    /// `0 <= y <= x / N` on `[0, N]`
    RightTriangle,
    /// Base `[0, N]`, unit-height top, side walls of the given slope.
    Trapezoid,
    /// Total length `len`, unit height, semicircular caps.
    Stadium,
    /// Hull of uniform points in the unit square, normalized.
    RandomHull,
    /// A user-supplied vertex list; only reachable through [`DomainFile`].
    Polygon,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rectangle => "rectangle",
            Self::Ellipse => "ellipse",
            Self::RightTriangle => "right_triangle",
            Self::Trapezoid => "trapezoid",
            Self::Stadium => "stadium",
            Self::RandomHull => "random_hull",
            Self::Polygon => "polygon",
        }
    }
}

/// One member of a family: the main parameter plus the family's fixed
/// secondary parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub family: FamilyKind,
    /// `a`, `A`, `N`, `N`, `len`, or the seed for random hulls.
    pub param: f64,
    /// Trapezoid side-wall slope.
    pub slope: Option<f64>,
    /// Number of random points for random hulls.
    pub n_vertices: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub id: String,
    pub spec: DomainSpec,
    pub domain: ConvexDomain,
}

fn pair(a: f64, b: f64, lower: Curve, upper: Curve) -> Result<ConvexDomain> {
    Ok(ConvexDomain::from_normalized(BoundaryFunctionPair::new(a, b, lower, upper)?))
}

fn fmt_param(p: f64) -> String {
    format!("{p}")
}

pub fn member(spec: &DomainSpec) -> Result<Member> {
    let p = spec.param;
    if !(p.is_finite() && (p > 0.0 || spec.family == FamilyKind::RandomHull && p >= 0.0)) {
        return Err(Error::BadParam(format!("{} parameter must be positive, got {p}", spec.family.name())));
    }
    let flat = |v| Curve::Const { value: v };
    let (domain, id) = match spec.family {
        FamilyKind::Rectangle => (pair(0.0, p, flat(0.0), flat(1.0))?, format!("rectangle_{}", fmt_param(p))),
        FamilyKind::Ellipse => {
            let arc = |upper| Curve::EllipseArc { cx: 0.0, half_len: p, cy: 0.5, half_height: 0.5, upper };
            (pair(-p, p, arc(false), arc(true))?, format!("ellipse_{}", fmt_param(p)))
        }
        FamilyKind::RightTriangle => (
            pair(0.0, p, flat(0.0), Curve::Line { intercept: 0.0, slope: 1.0 / p })?,
            format!("right_triangle_{}", fmt_param(p)),
        ),
        FamilyKind::Trapezoid => {
            let s = spec.slope.ok_or_else(|| Error::BadParam("trapezoid needs a slope".into()))?;
            if !(s > 0.0 && s * p > 2.0) {
                return Err(Error::BadParam(format!("trapezoid needs slope > 0 and N * slope > 2, got N = {p}, slope = {s}")));
            }
            let top = vec![
                Point::new(0.0, 0.0),
                Point::new(1.0 / s, 1.0),
                Point::new(p - 1.0 / s, 1.0),
                Point::new(p, 0.0),
            ];
            (
                pair(0.0, p, flat(0.0), Curve::Polyline { points: top })?,
                format!("trapezoid_{}_s{}", fmt_param(p), fmt_param(s)),
            )
        }
        FamilyKind::Stadium => {
            if p < 1.0 {
                return Err(Error::BadParam(format!("stadium length must be at least 1, got {p}")));
            }
            let arc = |upper| Curve::StadiumArc { x0: 0.0, x1: p, cy: 0.5, radius: 0.5, upper };
            (pair(0.0, p, arc(false), arc(true))?, format!("stadium_{}", fmt_param(p)))
        }
        FamilyKind::RandomHull => {
            let n = spec.n_vertices.ok_or_else(|| Error::BadParam("random_hull needs n_vertices".into()))?;
            if n < 3 || p.fract() != 0.0 {
                return Err(Error::BadParam(format!("random_hull needs an integer seed and n >= 3, got {p}, {n}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(p as u64);
            let pts: Vec<Point> = (0..n).map(|_| Point::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0))).collect();
            let hull = convex_hull(&pts);
            (normalize_domain(&RawDomain::Polygon(hull))?, format!("random_hull_{}_n{n}", p as u64))
        }
        FamilyKind::Polygon => return Err(Error::BadParam("polygon domains are given by their vertices".into())),
    };
    Ok(Member { id, spec: spec.clone(), domain })
}

/// Members in parameter order. An empty parameter list is an error.
pub fn generate_family(family: FamilyKind, params: &[f64], slope: Option<f64>, n_vertices: Option<usize>) -> Result<Vec<Member>> {
    if params.is_empty() {
        return Err(Error::BadParam(format!("{} family has no members", family.name())));
    }
    params
        .iter()
        .map(|&param| member(&DomainSpec { family, param, slope, n_vertices }))
        .collect()
}

/// A single-domain description read from a config file: either a named
/// family with a parameter map, or a polygon to be normalized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainFile {
    #[serde(default)]
    pub family: Option<FamilyKind>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub polygon: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub n_samples: Option<usize>,
}

impl DomainFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_member(&self) -> Result<Member> {
        match (&self.family, &self.polygon) {
            (Some(family), None) => {
                let (main, extra): (&str, &[&str]) = match family {
                    FamilyKind::Rectangle => ("a", &[]),
                    FamilyKind::Ellipse => ("A", &[]),
                    FamilyKind::RightTriangle => ("N", &[]),
                    FamilyKind::Trapezoid => ("N", &["slope"]),
                    FamilyKind::Stadium => ("len", &[]),
                    FamilyKind::RandomHull => ("seed", &["n_vertices"]),
                    FamilyKind::Polygon => return Err(Error::Config("use `polygon = [[x, y], ...]`".into())),
                };
                if let Some(k) = self.params.keys().find(|k| k.as_str() != main && !extra.contains(&k.as_str())) {
                    return Err(Error::Config(format!("unknown parameter {k} for {}", family.name())));
                }
                let param = *self
                    .params
                    .get(main)
                    .ok_or_else(|| Error::Config(format!("{} needs parameter {main}", family.name())))?;
                member(&DomainSpec {
                    family: *family,
                    param,
                    slope: self.params.get("slope").copied(),
                    n_vertices: self.params.get("n_vertices").map(|&v| v as usize),
                })
            }
            (None, Some(poly)) => {
                let pts: Vec<Point> = poly.iter().map(|p| Point::new(p[0], p[1])).collect();
                let domain = normalize_domain(&RawDomain::Polygon(pts))?;
                Ok(Member {
                    id: "polygon".into(),
                    spec: DomainSpec { family: FamilyKind::Polygon, param: 0.0, slope: None, n_vertices: None },
                    domain,
                })
            }
            _ => Err(Error::Config("a domain file needs exactly one of `family` or `polygon`".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{height_profile, length_scale};

    fn ls(m: &Member) -> f64 {
        length_scale(&height_profile(&m.domain, 8193).unwrap()).unwrap().l
    }

    #[test]
    fn named_families_have_unit_height() {
        for (f, p, s) in [
            (FamilyKind::Rectangle, 4.0, None),
            (FamilyKind::Ellipse, 8.0, None),
            (FamilyKind::RightTriangle, 64.0, None),
            (FamilyKind::Trapezoid, 10.0, Some(2.0)),
            (FamilyKind::Stadium, 10.0, None),
        ] {
            let m = member(&DomainSpec { family: f, param: p, slope: s, n_vertices: None }).unwrap();
            let d = &m.domain;
            let xs: Vec<f64> = (0..=1000).map(|k| d.a() + (d.b() - d.a()) * k as f64 / 1000.0).collect();
            let lo = xs.iter().map(|&x| d.f1(x)).fold(f64::INFINITY, f64::min);
            let hi = xs.iter().map(|&x| d.f2(x)).fold(f64::NEG_INFINITY, f64::max);
            assert!(lo.abs() < 1e-12 && (hi - 1.0).abs() < 1e-12, "{}", m.id);
        }
    }

    #[test]
    fn rectangle_and_stadium_length_scales() {
        let r = member(&DomainSpec { family: FamilyKind::Rectangle, param: 4.0, slope: None, n_vertices: None }).unwrap();
        assert!((ls(&r) - 4.0).abs() < 1e-10);
        let s = member(&DomainSpec { family: FamilyKind::Stadium, param: 10.0, slope: None, n_vertices: None }).unwrap();
        assert!((s.domain.height(5.0) - 1.0).abs() < 1e-15);
        assert!((ls(&s) - 10.0).abs() <= 1.0, "{}", ls(&s));
    }

    #[test]
    fn random_hulls_are_reproducible() {
        let spec = DomainSpec { family: FamilyKind::RandomHull, param: 7.0, slope: None, n_vertices: Some(20) };
        let (a, b) = (member(&spec).unwrap(), member(&spec).unwrap());
        assert_eq!(a, b);
        let xs: Vec<f64> = (0..=64).map(|k| a.domain.a() + (a.domain.b() - a.domain.a()) * k as f64 / 64.0).collect();
        for x in xs {
            assert_eq!(a.domain.height(x).to_bits(), b.domain.height(x).to_bits());
        }
        let other = member(&DomainSpec { param: 8.0, ..spec }).unwrap();
        assert_ne!(a.domain, other.domain);
    }

    #[test]
    fn domain_files() {
        let m = DomainFile::from_toml("family = \"ellipse\"\nparams = { A = 8 }\n").unwrap().to_member().unwrap();
        assert_eq!(m.id, "ellipse_8");
        let p = DomainFile::from_toml("polygon = [[0, 0], [4, 0], [4, 1], [0, 1]]\n").unwrap().to_member().unwrap();
        assert!((p.domain.b() - p.domain.a() - 4.0).abs() < 1e-12);
        let bad_key = DomainFile::from_toml("family = \"ellipse\"\nparams = { a = 8 }\n").unwrap();
        assert!(matches!(bad_key.to_member(), Err(Error::Config(_))));
        assert!(DomainFile::from_toml("family = \"ellipse\"\nwidth = 3\n").is_err());
    }

    #[test]
    fn bad_parameters_are_rejected() {
        assert!(matches!(generate_family(FamilyKind::Ellipse, &[], None, None), Err(Error::BadParam(_))));
        assert!(generate_family(FamilyKind::Rectangle, &[-1.0], None, None).is_err());
        assert!(generate_family(FamilyKind::Trapezoid, &[4.0], None, None).is_err());
        assert!(generate_family(FamilyKind::Stadium, &[0.5], None, None).is_err());
        let fam = generate_family(FamilyKind::Ellipse, &[4.0, 8.0], None, None).unwrap();
        assert_eq!(fam.iter().map(|m| m.id.as_str()).collect::<Vec<_>>(), ["ellipse_4", "ellipse_8"]);
    }
}
