use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{GroupedPopulation, LabeledSample};
use crate::error::{validation, Error, Result};
use crate::scalar::Scalar;
use crate::score_dist::ScoreDistribution;

const POPULATION_HEADER: [&str; 3] = ["group", "score", "weight"];
const LABELED_HEADER: [&str; 4] = ["group", "score", "weight", "label"];

/// Contents of a CSV file, shaped by its header.
#[derive(Debug, Clone, PartialEq)]
pub enum CsvData<T> {
    Population(GroupedPopulation<T>),
    Labeled(Vec<LabeledSample<T>>),
}

/// Reads either a population file (`group,score,weight`) or a labeled file
/// (`group,score,weight,label`), chosen by the header.
pub fn from_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<CsvData<T>> {
    let rows = parse(File::open(path)?)?;
    if rows.labeled {
        Ok(CsvData::Labeled(rows.into_samples()))
    } else {
        rows.into_population().map(CsvData::Population)
    }
}

pub fn read_population_csv<T: Scalar>(reader: impl Read) -> Result<GroupedPopulation<T>> {
    let rows = parse(reader)?;
    if rows.labeled {
        return Err(validation("expected header `group,score,weight`, found a label column"));
    }
    rows.into_population()
}

pub fn read_labeled_csv<T: Scalar>(reader: impl Read) -> Result<Vec<LabeledSample<T>>> {
    let rows = parse(reader)?;
    if !rows.labeled {
        return Err(validation("expected header `group,score,weight,label`"));
    }
    Ok(rows.into_samples())
}

struct Row<T> {
    group: String,
    score: T,
    weight: T,
    label: bool,
}

struct Rows<T> {
    labeled: bool,
    rows: Vec<Row<T>>,
}

impl<T: Scalar> Rows<T> {
    fn into_population(self) -> Result<GroupedPopulation<T>> {
        let mut groups: Vec<(String, Vec<(T, T)>)> = Vec::new();
        for row in self.rows {
            match groups.iter_mut().find(|g| g.0 == row.group) {
                Some(g) => g.1.push((row.score, row.weight)),
                None => groups.push((row.group, vec![(row.score, row.weight)])),
            }
        }
        if groups.is_empty() {
            return Err(validation("population file has no rows"));
        }
        let groups = groups
            .into_iter()
            .map(|(name, pts)| {
                let mass: T = pts.iter().map(|p| p.1).sum();
                Ok((name, mass, ScoreDistribution::from_masses(pts)?))
            })
            .collect::<Result<Vec<_>>>()?;
        GroupedPopulation::from_masses(groups)
    }

    fn into_samples(self) -> Vec<LabeledSample<T>> {
        let total: T = self.rows.iter().map(|r| r.weight).sum();
        self.rows
            .into_iter()
            .map(|r| LabeledSample { group: r.group, score: r.score, label: r.label, weight: r.weight / total })
            .collect()
    }
}

fn parse<T: Scalar>(reader: impl Read) -> Result<Rows<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_ascii_lowercase).collect();
    let labeled = if header == LABELED_HEADER {
        true
    } else if header == POPULATION_HEADER {
        false
    } else {
        return Err(Error::Parse {
            line: 1,
            message: format!("unexpected header `{}`", header.join(",")),
        });
    };
    let width = header.len();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        if record.len() != width {
            return Err(err(format!("expected {width} fields, found {}", record.len())));
        }
        let group = record[0].to_owned();
        if group.is_empty() {
            return Err(err("empty group identifier".into()));
        }
        let score: f64 = record[1].parse().map_err(|_| err(format!("invalid score `{}`", &record[1])))?;
        if !(0.0..=1.0).contains(&score) {
            return Err(err(format!("score {score} outside [0, 1]")));
        }
        let weight: f64 = record[2].parse().map_err(|_| err(format!("invalid weight `{}`", &record[2])))?;
        if !weight.is_finite() {
            return Err(err(format!("invalid weight `{}`", &record[2])));
        }
        if weight <= 0.0 {
            return Err(validation(format!("line {line}: weight {weight} must be positive")));
        }
        let label = if labeled {
            match &record[3] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("label `{other}` is not 0 or 1"))),
            }
        } else {
            false
        };
        rows.push(Row { group, score: T::of(score), weight: T::of(weight), label });
    }
    Ok(Rows { labeled, rows })
}
