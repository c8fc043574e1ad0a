use crate::afv::{fisher_distance, set_distance_of_afvs};
use crate::error::{Error, Result};

/// Set Fisher Distances between classes, `entries[i][j]` for classes
/// `labels[i]` and `labels[j]`. Symmetric with a zero diagonal by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistanceMatrix {
    pub labels: Vec<u32>,
    pub entries: Vec<Vec<f64>>,
}

impl ClassDistanceMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Header row of labels, then one row per class.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class");
        for l in &self.labels {
            out.push_str(&format!(",{l}"));
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.entries) {
            out.push_str(&l.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// `sets[k]` holds the AFVs of class `labels[k]`.
pub fn class_distance_matrix<V: AsRef<[f64]>>(labels: &[u32], sets: &[Vec<V>]) -> Result<ClassDistanceMatrix> {
    if labels.len() != sets.len() {
        return Err(Error::contract("one label per class set"));
    }
    if let Some(k) = sets.iter().position(Vec::is_empty) {
        return Err(Error::contract(format!("class {} has no examples", labels[k])));
    }
    let n = sets.len();
    let mut entries = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = set_distance_of_afvs(&sets[i], &sets[j])?;
            entries[i][j] = d;
            entries[j][i] = d;
        }
    }
    Ok(ClassDistanceMatrix {
        labels: labels.to_vec(),
        entries,
    })
}

/// Class labels in ascending order, each with its rows.
pub type LabelGroups<'a> = (Vec<u32>, Vec<Vec<&'a [f64]>>);

/// Groups rows by label, classes in ascending order.
pub fn group_by_label<'a>(rows: &'a [Vec<f64>], labels: &[u32]) -> Result<LabelGroups<'a>> {
    if rows.len() != labels.len() {
        return Err(Error::contract("one label per row"));
    }
    let mut classes: Vec<u32> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut sets = vec![Vec::new(); classes.len()];
    for (r, l) in rows.iter().zip(labels) {
        let k = classes.binary_search(l).expect("label was collected");
        sets[k].push(r.as_slice());
    }
    Ok((classes, sets))
}

/// Ids of the `k` database vectors nearest to `query`, nearest first; equal
/// distances are ordered by lower id.
pub fn knn_query<V: AsRef<[f64]>>(query: &[f64], database: &[V], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > database.len() {
        return Err(Error::contract(format!("k = {k} outside 1..={}", database.len())));
    }
    let mut scored = database
        .iter()
        .enumerate()
        .map(|(i, v)| Ok((fisher_distance(query, v.as_ref())?, i)))
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(scored.into_iter().take(k).map(|(_, i)| i).collect())
}
