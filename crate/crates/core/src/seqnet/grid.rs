//! Grid search over (architecture, nodes, epochs).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Architecture, EvalReport, NetConfig, SeqNetModel};
use crate::encode::{SequenceDataset, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpace {
    /// Explicit configurations; each is trained once.
    pub configs: Vec<(Architecture, usize, usize)>,
    pub learning_rate: f64,
    pub batch_size: usize,
}

impl GridSpace {
    /// Full cartesian product of the given sets.
    pub fn product(archs: &[Architecture], nodes: &[usize], epochs: &[usize]) -> Self {
        let mut configs = Vec::new();
        for &a in archs {
            for &n in nodes {
                for &e in epochs {
                    configs.push((a, n, e));
                }
            }
        }
        GridSpace {
            configs,
            learning_rate: super::DEFAULT_LEARNING_RATE,
            batch_size: super::DEFAULT_BATCH,
        }
    }

    /// The three reference configurations: dense (25, 30), LSTM (20, 200),
    /// BiLSTM (20, 150).
    pub fn reference() -> Self {
        GridSpace {
            configs: vec![
                (Architecture::Dense, 25, 30),
                (Architecture::Lstm, 20, 200),
                (Architecture::BiLstm, 20, 150),
            ],
            learning_rate: super::DEFAULT_LEARNING_RATE,
            batch_size: super::DEFAULT_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub architecture: Architecture,
    pub nodes: usize,
    pub epochs: usize,
    pub accuracy: f64,
    pub loss: f64,
    pub best: bool,
    pub report: EvalReport,
}

/// Trains every configuration on `split.train`, evaluates on `split.test`
/// and ranks by accuracy (desc), then loss (asc).
pub fn grid_search(
    space: &GridSpace,
    data: &SequenceDataset,
    split: &Split,
    seed: u64,
) -> Result<(Vec<GridRow>, Vec<SeqNetModel>)> {
    if space.configs.is_empty() {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let test = data.subset(&split.test);
    let results: Vec<(GridRow, SeqNetModel)> = space
        .configs
        .par_iter()
        .map(|&(architecture, nodes, epochs)| {
            let mut cfg = NetConfig::new(architecture, nodes, epochs).with_seed(seed);
            cfg.learning_rate = space.learning_rate;
            cfg.batch_size = space.batch_size;
            let model = SeqNetModel::for_dataset(cfg, data)?;
            let model = train(model, data, &split.train, Some(&split.test))?;
            let report = model.evaluate(&test)?;
            Ok((
                GridRow {
                    architecture,
                    nodes,
                    epochs,
                    accuracy: report.accuracy,
                    loss: report.loss,
                    best: false,
                    report,
                },
                model,
            ))
        })
        .collect::<Result<_>>()?;
    let mut ranked: Vec<(usize, (GridRow, SeqNetModel))> = results.into_iter().enumerate().collect();
    ranked.sort_by(|(ia, (a, _)), (ib, (b, _))| {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then(a.loss.total_cmp(&b.loss))
            .then(ia.cmp(ib))
    });
    let (mut rows, models): (Vec<GridRow>, Vec<SeqNetModel>) = ranked.into_iter().map(|(_, r)| r).unzip();
    rows[0].best = true;
    Ok((rows, models))
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy_data;
    use super::*;

    #[test]
    fn single_point_grid_matches_direct_training() {
        let data = toy_data(
            &[(&[1, 2], 0.5, 0), (&[1, 3], 0.4, 0), (&[3], 0.1, 1), (&[4, 4], 0.9, 1)],
            3,
        );
        let split = Split {
            train: vec![0, 2, 3],
            test: vec![1],
        };
        let mut space = GridSpace::product(&[Architecture::Lstm], &[3], &[2]);
        space.learning_rate = 0.05;
        let (rows, _) = grid_search(&space, &data, &split, 4).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].best);
        let cfg = NetConfig::new(Architecture::Lstm, 3, 2).with_seed(4).with_learning_rate(0.05);
        let model = train(SeqNetModel::for_dataset(cfg, &data).unwrap(), &data, &split.train, None).unwrap();
        let direct = model.evaluate(&data.subset(&split.test)).unwrap();
        assert_eq!(rows[0].report, direct);
    }

    #[test]
    fn reference_grid_has_three_rows() {
        let space = GridSpace::reference();
        assert_eq!(space.configs.len(), 3);
        assert!(space.configs.contains(&(Architecture::Lstm, 20, 200)));
    }

    #[test]
    fn empty_grid_is_rejected() {
        let data = toy_data(&[(&[1], 0.5, 0), (&[2], 0.1, 1)], 2);
        let space = GridSpace::product(&[], &[1], &[1]);
        let split = Split { train: vec![0], test: vec![1] };
        assert!(grid_search(&space, &data, &split, 0).is_err());
    }
}
