//! Sample sources: CSV files and seeded synthetic plants.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::architectures::{FeatureMap, Polynomial};
use crate::error::{Error, Result};
use crate::grammar::SpecParams;
use crate::linalg::Vector;

pub type Sample = (Vector, f64);

/// Reads `x1,...,xn,y` CSV rows in file order.
pub struct CsvSamples<R: Read> {
    reader: csv::Reader<R>,
    dim: usize,
    record: csv::StringRecord,
}

impl CsvSamples<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path.as_ref())?;
        CsvSamples::from_reader(BufReader::new(file))
    }
}

impl<R: Read> CsvSamples<R> {
    pub fn from_reader(reader: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = reader.headers().map_err(|e| Error::Data {
            line: 1,
            reason: e.to_string(),
        })?;
        let cols: Vec<&str> = header.iter().collect();
        if cols.len() < 2 || cols.last() != Some(&"y") {
            return Err(Error::Data {
                line: 1,
                reason: "header must be `x1,...,xn,y`".into(),
            });
        }
        for (i, name) in cols[..cols.len() - 1].iter().enumerate() {
            if *name != format!("x{}", i + 1) {
                return Err(Error::Data {
                    line: 1,
                    reason: format!("expected column `x{}`, found `{name}`", i + 1),
                });
            }
        }
        let dim = cols.len() - 1;
        Ok(CsvSamples {
            reader,
            dim,
            record: csv::StringRecord::new(),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.dim
    }
}

impl<R: Read> Iterator for CsvSamples<R> {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.reader.read_record(&mut self.record) {
            Ok(false) => None,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                Some(Err(Error::Data {
                    line,
                    reason: e.to_string(),
                }))
            }
            Ok(true) => {
                let line = self.record.position().map_or(0, |p| p.line());
                Some(parse_row(&self.record, self.dim, line))
            }
        }
    }
}

fn parse_row(record: &csv::StringRecord, dim: usize, line: u64) -> Result<Sample> {
    if record.len() != dim + 1 {
        return Err(Error::Data {
            line,
            reason: format!("expected {} columns, found {}", dim + 1, record.len()),
        });
    }
    let mut values = Vec::with_capacity(dim + 1);
    for token in record.iter() {
        let v: f64 = token.parse().map_err(|_| Error::Data {
            line,
            reason: format!("non-numeric token `{token}`"),
        })?;
        if !v.is_finite() {
            return Err(Error::Data {
                line,
                reason: format!("non-finite value `{token}`"),
            });
        }
        values.push(v);
    }
    let y = values.pop().expect("dim + 1 >= 2 values");
    Ok((Vector::from(values), y))
}

/// Convenience for callers that want the whole file.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Vec<Sample>> {
    CsvSamples::open(path)?.collect()
}

/// Writes samples as `x1,...,xn,y` with round-trip float formatting.
pub fn write_csv<W: Write>(mut out: W, dim: usize, samples: impl IntoIterator<Item = Sample>) -> Result<()> {
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).chain(["y".to_string()]).collect();
    writeln!(out, "{}", header.join(","))?;
    for (x, y) in samples {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(y.to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub enum SyntheticKind {
    /// `y = w·[1, x] + noise`.
    LinearPlant { noise_std: f64 },
    /// `y = w·g(x) + noise` with `g` the biased polynomial map of `order`.
    PolynomialPlant { order: usize, noise_std: f64 },
    /// Constant input `x = c·1` chosen so that `μ‖g(x)‖² = target` under
    /// fixed-rate GD on the polynomial map of `order`.
    DivergenceProbe {
        order: usize,
        bias: bool,
        mu: f64,
        eta_gnorm2_target: f64,
        y: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub input_dim: usize,
    /// Inputs are uniform on `[−range, range]` per coordinate.
    pub range: f64,
}

impl SyntheticSpec {
    /// `linear:dim=<n>,noise=<f>[,range=<a>]`
    /// `poly:dim=<n>,order=<r>,noise=<f>[,range=<a>]`
    /// `probe:dim=<n>,order=<r>,mu=<f>,target=<f>[,bias=<0|1>][,y=<f>]`
    pub fn parse(spec: &str) -> Result<Self> {
        let mut p = SpecParams::parse(spec)?;
        let input_dim: usize = p.required("dim")?;
        let parsed = match p.kind {
            "linear" => SyntheticSpec {
                kind: SyntheticKind::LinearPlant {
                    noise_std: p.required("noise")?,
                },
                input_dim,
                range: p.optional("range")?.unwrap_or(1.0),
            },
            "poly" => SyntheticSpec {
                kind: SyntheticKind::PolynomialPlant {
                    order: p.required("order")?,
                    noise_std: p.required("noise")?,
                },
                input_dim,
                range: p.optional("range")?.unwrap_or(1.0),
            },
            "probe" => SyntheticSpec {
                kind: SyntheticKind::DivergenceProbe {
                    order: p.required("order")?,
                    mu: p.required("mu")?,
                    eta_gnorm2_target: p.required("target")?,
                    bias: p.flag("bias", true)?,
                    y: p.optional("y")?.unwrap_or(1.0),
                },
                input_dim,
                range: 1.0,
            },
            other => return Err(p.error(format!("unknown synthetic source `{other}`"))),
        };
        p.finish()?;
        parsed.validate()?;
        Ok(parsed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::domain("synthetic: dim must be >= 1"));
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return Err(Error::domain("synthetic: range must be > 0"));
        }
        match self.kind {
            SyntheticKind::LinearPlant { noise_std } | SyntheticKind::PolynomialPlant { noise_std, .. } => {
                if !(noise_std >= 0.0 && noise_std.is_finite()) {
                    return Err(Error::domain("synthetic: noise must be >= 0"));
                }
            }
            SyntheticKind::DivergenceProbe { mu, eta_gnorm2_target, .. } => {
                if mu.is_nan() || mu <= 0.0 || eta_gnorm2_target.is_nan() || eta_gnorm2_target <= 0.0 {
                    return Err(Error::domain("probe: mu and target must be > 0"));
                }
            }
        }
        if let SyntheticKind::PolynomialPlant { order: 0, .. } = self.kind {
            return Err(Error::domain("poly: order must be >= 1"));
        }
        Ok(())
    }

    /// The feature map under which the targets are exactly realisable.
    pub fn plant_map(&self) -> Result<FeatureMap> {
        match self.kind {
            SyntheticKind::LinearPlant { .. } => FeatureMap::polynomial(1, self.input_dim, true),
            SyntheticKind::PolynomialPlant { order, .. } => FeatureMap::polynomial(order, self.input_dim, true),
            SyntheticKind::DivergenceProbe { order, bias, .. } => FeatureMap::polynomial(order, self.input_dim, bias),
        }
    }
}

/// Seeded, infinite sample stream for a [`SyntheticSpec`].
pub struct Generator {
    spec: SyntheticSpec,
    map: FeatureMap,
    rng: ChaCha8Rng,
    true_w: Vector,
    noise: Option<Normal<f64>>,
    probe_x: Option<Vector>,
}

impl Generator {
    pub fn new(spec: SyntheticSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let map = spec.plant_map()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut noise = None;
        let mut probe_x = None;
        let true_w = match spec.kind {
            SyntheticKind::LinearPlant { noise_std } | SyntheticKind::PolynomialPlant { noise_std, .. } => {
                if noise_std > 0.0 {
                    noise = Some(Normal::new(0.0, noise_std).map_err(|e| Error::domain(e.to_string()))?);
                }
                Vector::from(
                    (0..map.output_dim())
                        .map(|_| rng.random_range(-1.0..=1.0))
                        .collect::<Vec<f64>>(),
                )
            }
            SyntheticKind::DivergenceProbe {
                mu, eta_gnorm2_target, ..
            } => {
                let FeatureMap::Polynomial(poly) = &map else {
                    unreachable!("plant maps are polynomial")
                };
                let c = probe_scale(poly, eta_gnorm2_target / mu)?;
                probe_x = Some(Vector::from(vec![c; spec.input_dim]));
                Vector::zeros(map.output_dim())
            }
        };
        Ok(Generator {
            spec,
            map,
            rng,
            true_w,
            noise,
            probe_x,
        })
    }

    pub fn true_weights(&self) -> &Vector {
        &self.true_w
    }

    pub fn plant_map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }
}

impl Iterator for Generator {
    type Item = Result<Sample>;

    fn next(&mut self) -> Option<Self::Item> {
        if let (Some(x), SyntheticKind::DivergenceProbe { y, .. }) = (&self.probe_x, &self.spec.kind) {
            return Some(Ok((x.clone(), *y)));
        }
        let a = self.spec.range;
        let x = Vector::from(
            (0..self.spec.input_dim)
                .map(|_| self.rng.random_range(-a..=a))
                .collect::<Vec<f64>>(),
        );
        let g = match self.map.features(&x) {
            Ok(g) => g,
            Err(e) => return Some(Err(e)),
        };
        let mut y = self.true_w.dot(&g);
        if let Some(noise) = &self.noise {
            y += noise.sample(&mut self.rng);
        }
        Some(Ok((x, y)))
    }
}

/// Solves `‖g(c·1)‖² = target` for `c ≥ 0` by bisection.
fn probe_scale(poly: &Polynomial, target: f64) -> Result<f64> {
    let norm_sq = |c: f64| -> f64 {
        poly.monomials()
            .iter()
            .map(|m| c.powi(2 * m.len() as i32))
            .sum()
    };
    let floor = norm_sq(0.0);
    if target < floor {
        return Err(Error::domain(format!(
            "probe: ‖g‖² cannot go below {floor}, target/mu = {target}"
        )));
    }
    let mut hi = 1.0;
    while norm_sq(hi) < target {
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::domain("probe: target out of reach"));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_sq(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
