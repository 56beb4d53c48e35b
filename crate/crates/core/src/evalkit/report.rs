use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::metrics::{macro_average, micro_average, EntityCounts, Prf};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityRow<T> {
    pub entity: String,
    pub counts: EntityCounts,
    pub metrics: Prf<T>,
}

/// Per-entity metrics plus micro and macro rows. Rows keep the order in which
/// entities were supplied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport<T> {
    pub entities: Vec<EntityRow<T>>,
    pub micro: Prf<T>,
    #[serde(rename = "macro")]
    pub macro_avg: Prf<T>,
}

impl<T: Scalar> MetricsReport<T> {
    pub fn from_counts<S, I>(counts: I) -> Self
    where
        S: Into<String>,
        I: IntoIterator<Item = (S, EntityCounts)>,
    {
        let entities: Vec<EntityRow<T>> = counts
            .into_iter()
            .map(|(entity, counts)| EntityRow { entity: entity.into(), counts, metrics: Prf::from_counts(counts) })
            .collect();
        let pooled: Vec<EntityCounts> = entities.iter().map(|r| r.counts).collect();
        Self { micro: micro_average(&pooled), macro_avg: macro_average(entities.iter().map(|r| &r.metrics)), entities }
    }

    pub fn per_entity(&self) -> BTreeMap<String, Prf<T>> {
        self.entities.iter().map(|r| (r.entity.clone(), r.metrics)).collect()
    }

    pub fn counts(&self) -> BTreeMap<String, EntityCounts> {
        self.entities.iter().map(|r| (r.entity.clone(), r.counts)).collect()
    }

    /// Fixed-width text table with P/R/F1 columns and micro/macro rows.
    pub fn render_table(&self) -> String {
        let width =
            self.entities.iter().map(|r| r.entity.chars().count()).chain(["Macro average".len()]).max().unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>5} {:>5} {:>5}  {:>6} {:>6} {:>6}",
            "Entity", "TP", "FP", "FN", "P", "R", "F1"
        );
        let rule = "-".repeat(width + 42);
        let _ = writeln!(out, "{rule}");
        for r in &self.entities {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5} {:>5} {:>5}  {:>6.3} {:>6.3} {:>6.3}",
                r.entity,
                r.counts.tp,
                r.counts.fp,
                r.counts.fn_,
                r.metrics.precision.to_f64(),
                r.metrics.recall.to_f64(),
                r.metrics.f1.to_f64()
            );
        }
        let _ = writeln!(out, "{rule}");
        for (name, m) in [("Micro average", &self.micro), ("Macro average", &self.macro_avg)] {
            let _ = writeln!(
                out,
                "{:<width$}  {:>5} {:>5} {:>5}  {:>6.3} {:>6.3} {:>6.3}",
                name,
                "",
                "",
                "",
                m.precision.to_f64(),
                m.recall.to_f64(),
                m.f1.to_f64()
            );
        }
        out
    }

    /// Tab-separated form of [`render_table`](Self::render_table) with full
    /// precision values.
    pub fn render_tsv(&self) -> String {
        let mut out = String::from("entity\ttp\tfp\tfn\tprecision\trecall\tf1\n");
        for r in &self.entities {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.entity,
                r.counts.tp,
                r.counts.fp,
                r.counts.fn_,
                r.metrics.precision.to_f64(),
                r.metrics.recall.to_f64(),
                r.metrics.f1.to_f64()
            );
        }
        for (name, m) in [("micro", &self.micro), ("macro", &self.macro_avg)] {
            let _ = writeln!(out, "{name}\t\t\t\t{}\t{}\t{}", m.precision.to_f64(), m.recall.to_f64(), m.f1.to_f64());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_rows_and_averages() {
        let r: MetricsReport<f64> =
            MetricsReport::from_counts([("Age", EntityCounts::new(8, 2, 2)), ("Sex", EntityCounts::new(1, 1, 3))]);
        assert_eq!(r.micro.precision, 0.75);
        assert_eq!(r.macro_avg.precision, (0.8 + 0.5) / 2.0);
        assert_eq!(r.entities[0].entity, "Age");
        let table = r.render_table();
        assert!(table.contains("Micro average"));
        assert!(table.contains("Macro average"));
        assert!(table.lines().any(|l| l.starts_with("Age") && l.contains("0.800")));
        let tsv = r.render_tsv();
        assert_eq!(tsv.lines().count(), 5);
    }

    #[test]
    fn json_shape() {
        let r: MetricsReport<f64> = MetricsReport::from_counts([("Age", EntityCounts::new(1, 0, 0))]);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["entities"][0]["counts"]["fn"], 0);
        assert_eq!(v["macro"]["f1"], 1.0);
    }
}
