//! Column-oriented view of simulated equilibria plus the CSV exchange format.
//!
//! Header layout: `s_1..s_N, gamma_1..gamma_N, ell_agg_1..ell_agg_M,
//! p_1..p_M`. The `gamma_*` and `ell_agg_*` columns are optional on input
//! since neither is observable in practice; values are written with 17
//! significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::autodiff::Tensor;
use crate::contagion::EquilibriumRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    banks: usize,
    assets: usize,
    shocks: Vec<f64>,
    gamma: Option<Vec<f64>>,
    ell_agg: Option<Vec<f64>>,
    prices: Vec<f64>,
}

impl Dataset {
    pub fn from_records(records: &[EquilibriumRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidArgument("dataset needs at least one record".into()))?;
        let (banks, assets) = (first.s.len(), first.p.len());
        let mut ds = Dataset {
            banks,
            assets,
            shocks: Vec::with_capacity(records.len() * banks),
            gamma: Some(Vec::with_capacity(records.len() * banks)),
            ell_agg: Some(Vec::with_capacity(records.len() * assets)),
            prices: Vec::with_capacity(records.len() * assets),
        };
        for (i, r) in records.iter().enumerate() {
            if r.s.len() != banks || r.gamma.len() != banks || r.p.len() != assets || r.ell_agg.len() != assets {
                return Err(Error::shape("dataset", format!("record {i} has inconsistent dimensions")));
            }
            ds.shocks.extend_from_slice(&r.s);
            ds.gamma.as_mut().unwrap().extend_from_slice(&r.gamma);
            ds.ell_agg.as_mut().unwrap().extend_from_slice(&r.ell_agg);
            ds.prices.extend_from_slice(&r.p);
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.prices.len() / self.assets
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn banks(&self) -> usize {
        self.banks
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn has_gamma(&self) -> bool {
        self.gamma.is_some()
    }

    pub fn has_liquidations(&self) -> bool {
        self.ell_agg.is_some()
    }

    /// Drops the hidden columns, leaving only what an observer would see.
    pub fn observed_only(&self) -> Dataset {
        Dataset {
            gamma: None,
            ell_agg: None,
            ..self.clone()
        }
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        let (n, m) = (self.banks, self.assets);
        Dataset {
            banks: n,
            assets: m,
            shocks: self.shocks[range.start * n..range.end * n].to_vec(),
            gamma: self.gamma.as_ref().map(|g| g[range.start * n..range.end * n].to_vec()),
            ell_agg: self.ell_agg.as_ref().map(|l| l[range.start * m..range.end * m].to_vec()),
            prices: self.prices[range.start * m..range.end * m].to_vec(),
        }
    }

    pub fn shock(&self, i: usize) -> &[f64] {
        &self.shocks[i * self.banks..(i + 1) * self.banks]
    }

    pub fn price(&self, i: usize) -> &[f64] {
        &self.prices[i * self.assets..(i + 1) * self.assets]
    }

    pub fn shocks(&self) -> Tensor {
        Tensor::matrix(self.len(), self.banks, self.shocks.clone()).expect("consistent")
    }

    pub fn prices(&self) -> Tensor {
        Tensor::matrix(self.len(), self.assets, self.prices.clone()).expect("consistent")
    }

    pub fn ell_agg(&self) -> Option<Tensor> {
        self.ell_agg
            .as_ref()
            .map(|l| Tensor::matrix(self.len(), self.assets, l.clone()).expect("consistent"))
    }

    /// Per-bank, per-asset liquidation fractions (`N·M` columns, bank-major),
    /// reconstructed from `gamma` under proportional liquidation.
    pub fn bank_liquidations(&self) -> Option<Tensor> {
        let gamma = self.gamma.as_ref()?;
        let m = self.assets;
        let data = gamma.iter().flat_map(|g| std::iter::repeat_n(*g, m)).collect();
        Some(Tensor::matrix(self.len(), self.banks * m, data).expect("consistent"))
    }

    /// Gathers rows `idx` of `source` (a `[len, cols]` matrix).
    pub fn gather(source: &Tensor, idx: &[usize]) -> Tensor {
        let cols = source.shape()[1];
        let mut data = Vec::with_capacity(idx.len() * cols);
        for &i in idx {
            data.extend_from_slice(source.row(i));
        }
        Tensor::matrix(idx.len(), cols, data).expect("consistent")
    }

    fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = (1..=self.banks).map(|i| format!("s_{i}")).collect();
        if self.gamma.is_some() {
            h.extend((1..=self.banks).map(|i| format!("gamma_{i}")));
        }
        if self.ell_agg.is_some() {
            h.extend((1..=self.assets).map(|i| format!("ell_agg_{i}")));
        }
        h.extend((1..=self.assets).map(|i| format!("p_{i}")));
        h
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        let to_err = |e: csv::Error| Error::format(path, e);
        w.write_record(self.header()).map_err(to_err)?;
        let (n, m) = (self.banks, self.assets);
        let mut row = Vec::with_capacity(2 * n + 2 * m);
        for i in 0..self.len() {
            row.clear();
            row.extend(self.shock(i).iter().map(|v| fmt17(*v)));
            if let Some(g) = &self.gamma {
                row.extend(g[i * n..(i + 1) * n].iter().map(|v| fmt17(*v)));
            }
            if let Some(l) = &self.ell_agg {
                row.extend(l[i * m..(i + 1) * m].iter().map(|v| fmt17(*v)));
            }
            row.extend(self.price(i).iter().map(|v| fmt17(*v)));
            w.write_record(&row).map_err(to_err)?;
        }
        let mut inner = w.into_inner().map_err(|e| Error::format(path, e))?;
        inner.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(file);
        let header = r.headers().map_err(|e| Error::format(path, e))?.clone();
        let columns = Columns::parse(&header).map_err(|msg| Error::format(path, msg))?;
        let mut ds = Dataset {
            banks: columns.s.len(),
            assets: columns.p.len(),
            shocks: Vec::new(),
            gamma: (!columns.gamma.is_empty()).then(Vec::new),
            ell_agg: (!columns.ell_agg.is_empty()).then(Vec::new),
            prices: Vec::new(),
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(path, e))?;
            let field = |c: usize| -> Result<f64> {
                let raw = rec.get(c).unwrap_or("");
                raw.trim().parse::<f64>().map_err(|_| {
                    Error::format(path, format!("row {}: cannot parse {:?} in column {}", line + 1, raw, &header[c]))
                })
            };
            for &c in &columns.s {
                ds.shocks.push(field(c)?);
            }
            if let Some(g) = ds.gamma.as_mut() {
                for &c in &columns.gamma {
                    g.push(field(c)?);
                }
            }
            if let Some(l) = ds.ell_agg.as_mut() {
                for &c in &columns.ell_agg {
                    l.push(field(c)?);
                }
            }
            for &c in &columns.p {
                ds.prices.push(field(c)?);
            }
        }
        if ds.is_empty() {
            return Err(Error::format(path, "dataset has no rows"));
        }
        Ok(ds)
    }
}

/// Column indices grouped by prefix.
struct Columns {
    s: Vec<usize>,
    gamma: Vec<usize>,
    ell_agg: Vec<usize>,
    p: Vec<usize>,
}

impl Columns {
    fn parse(header: &csv::StringRecord) -> std::result::Result<Self, String> {
        let mut cols = Columns {
            s: Vec::new(),
            gamma: Vec::new(),
            ell_agg: Vec::new(),
            p: Vec::new(),
        };
        for (i, name) in header.iter().enumerate() {
            let (prefix, idx) = name
                .rsplit_once('_')
                .ok_or_else(|| format!("unrecognised column {name:?}"))?;
            let group = match prefix {
                "s" => &mut cols.s,
                "gamma" => &mut cols.gamma,
                "ell_agg" => &mut cols.ell_agg,
                "p" => &mut cols.p,
                _ => return Err(format!("unrecognised column {name:?}")),
            };
            let expected = group.len() + 1;
            if idx.parse::<usize>() != Ok(expected) {
                return Err(format!("column {name:?} out of order, expected {prefix}_{expected}"));
            }
            group.push(i);
        }
        if cols.s.is_empty() || cols.p.is_empty() {
            return Err("dataset needs s_* and p_* columns".into());
        }
        if !cols.gamma.is_empty() && cols.gamma.len() != cols.s.len() {
            return Err("gamma_* columns must match s_* columns".into());
        }
        if !cols.ell_agg.is_empty() && cols.ell_agg.len() != cols.p.len() {
            return Err("ell_agg_* columns must match p_* columns".into());
        }
        Ok(cols)
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}
