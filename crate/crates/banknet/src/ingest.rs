//! Parsers for the two input formats: quarterly cross-border claim
//! tables (BIS-style CSV matrices) and account transaction edge lists.

use std::collections::HashMap;
use std::fs;
use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{GraphBuilder, GraphError, SnapshotSeries, WeightedDigraph};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file}:{line}: expected {expected} columns, found {found}")]
    MalformedRow {
        file: String,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("{file}:{line}: cannot parse amount {value:?}")]
    UnparseableAmount {
        file: String,
        line: usize,
        value: String,
    },
    #[error("{file}:{line}: non-empty claim on the diagonal for {country}")]
    DiagonalClaim {
        file: String,
        line: usize,
        country: String,
    },
    #[error("{file}:{line}: duplicate country label {country}")]
    DuplicateCountry {
        file: String,
        line: usize,
        country: String,
    },
    #[error("{file}:{line}: cannot parse record: {reason}")]
    UnparseableRecord {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{file}:{line}: start year {y1} after end year {y2}")]
    YearOrderViolation {
        file: String,
        line: usize,
        y1: i32,
        y2: i32,
    },
    #[error("duplicate period {period}")]
    DuplicatePeriod { period: String },
    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Matrix of cross-border claims: rows are debtor countries, columns are
/// lender countries. Cell values are amounts in millions of USD;
/// `None` means no claim is reported.
#[derive(Debug, Clone, PartialEq)]
pub struct BisTable {
    pub lenders: Vec<String>,
    pub debtors: Vec<String>,
    /// `cells[row][col]`, aligned with `debtors` x `lenders`.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl BisTable {
    /// Union of debtor and lender labels, sorted.
    pub fn countries(&self) -> Vec<String> {
        let mut all: Vec<String> = self
            .debtors
            .iter()
            .chain(self.lenders.iter())
            .cloned()
            .collect();
        all.sort_unstable();
        all.dedup();
        all
    }

    /// Sum of all present, positive amounts.
    pub fn total_amount(&self) -> f64 {
        self.cells
            .iter()
            .flatten()
            .filter_map(|c| *c)
            .filter(|a| *a > 0.0)
            .sum()
    }
}

/// Strip thousands separators and surrounding whitespace, then parse.
/// `"-"` and the empty string mean "no claim".
fn parse_cell(raw: &str) -> Result<Option<f64>, ()> {
    let trimmed = raw.trim();
    if trimmed.is_empty() || trimmed == "-" {
        return Ok(None);
    }
    let cleaned: String = trimmed.chars().filter(|c| *c != ',' && !c.is_whitespace()).collect();
    match cleaned.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(Some(v)),
        _ => Err(()),
    }
}

/// Parse one claims table. The first row is the lender header
/// (`Country,<lender1>,...`), each following row a debtor with one cell
/// per lender. Cells may carry thousands separators (`"3,179"` quoted
/// CSV-style) which are stripped.
pub fn parse_bis_csv<R: Read>(reader: R, file: &str) -> Result<BisTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| IngestError::Csv {
            file: file.to_owned(),
            source: e,
        })?,
        None => {
            return Ok(BisTable {
                lenders: Vec::new(),
                debtors: Vec::new(),
                cells: Vec::new(),
            })
        }
    };
    let lenders: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    let mut seen_lenders: HashMap<&str, ()> = HashMap::new();
    for l in &lenders {
        if seen_lenders.insert(l, ()).is_some() {
            return Err(IngestError::DuplicateCountry {
                file: file.to_owned(),
                line: 1,
                country: l.clone(),
            });
        }
    }
    let expected = lenders.len() + 1;

    let mut debtors = Vec::new();
    let mut cells = Vec::new();
    let mut seen_debtors: HashMap<String, ()> = HashMap::new();
    for (i, rec) in records.enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| IngestError::Csv {
            file: file.to_owned(),
            source: e,
        })?;
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue; // blank trailing line
        }
        if rec.len() != expected {
            return Err(IngestError::MalformedRow {
                file: file.to_owned(),
                line,
                expected,
                found: rec.len(),
            });
        }
        let debtor = rec[0].trim().to_owned();
        if seen_debtors.insert(debtor.clone(), ()).is_some() {
            return Err(IngestError::DuplicateCountry {
                file: file.to_owned(),
                line,
                country: debtor,
            });
        }
        let mut row = Vec::with_capacity(lenders.len());
        for (j, lender) in lenders.iter().enumerate() {
            let raw = &rec[j + 1];
            let cell = parse_cell(raw).map_err(|_| IngestError::UnparseableAmount {
                file: file.to_owned(),
                line,
                value: raw.to_owned(),
            })?;
            if *lender == debtor && cell.is_some_and(|v| v > 0.0) {
                return Err(IngestError::DiagonalClaim {
                    file: file.to_owned(),
                    line,
                    country: debtor.clone(),
                });
            }
            row.push(cell);
        }
        debtors.push(debtor);
        cells.push(row);
    }

    Ok(BisTable {
        lenders,
        debtors,
        cells,
    })
}

/// Graph over the union of the table's countries: a directed edge
/// debtor -> lender for every strictly positive cell, weighted by the
/// claimed amount. Zero and empty cells produce no edge.
pub fn bis_to_graph(table: &BisTable) -> WeightedDigraph {
    bis_to_graph_with_universe(&table.countries(), table)
}

/// Same as [`bis_to_graph`], but over a caller-supplied node universe
/// (a superset of the table's countries). Countries without claims stay
/// in the graph as isolated nodes, which keeps snapshot graphs of one
/// series structurally aligned.
pub fn bis_to_graph_with_universe(universe: &[String], table: &BisTable) -> WeightedDigraph {
    let mut b = GraphBuilder::new();
    for label in universe {
        b.node(label);
    }
    for (i, debtor) in table.debtors.iter().enumerate() {
        for (j, lender) in table.lenders.iter().enumerate() {
            if let Some(amount) = table.cells[i][j] {
                if amount > 0.0 {
                    b.edge_by_label(debtor, lender, amount)
                        .expect("table invariants rule out graph errors");
                }
            }
        }
    }
    b.build()
}

/// One merged account-pair record: `n` transactions moving a total of
/// `k` currency units from `source` to `target`, first seen in year `y1`
/// and last seen in year `y2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransactionEdge {
    pub source: String,
    pub target: String,
    pub n: u64,
    pub k: f64,
    pub y1: i32,
    pub y2: i32,
}

impl TransactionEdge {
    /// Activity span in whole years.
    pub fn period_years(&self) -> i32 {
        self.y2 - self.y1
    }

    /// Mean amount per transaction.
    pub fn average_amount(&self) -> f64 {
        self.k / self.n as f64
    }
}

/// Parse `source,target,n,k,y1,y2` records, merging duplicate ordered
/// account pairs by summing `n` and `k` and widening the year envelope
/// to `[min y1, max y2]`. Output is sorted by (source, target).
pub fn parse_transactions<R: Read>(
    reader: R,
    has_header: bool,
    file: &str,
) -> Result<Vec<TransactionEdge>, IngestError> {
    let mut text = String::new();
    let mut reader = reader;
    reader.read_to_string(&mut text).map_err(|e| IngestError::Io {
        file: file.to_owned(),
        source: e,
    })?;

    let bad = |line: usize, reason: &str| IngestError::UnparseableRecord {
        file: file.to_owned(),
        line,
        reason: reason.to_owned(),
    };

    let mut merged: HashMap<(String, String), TransactionEdge> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if has_header && i == 0 {
            continue;
        }
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad(line, &format!("expected 6 fields, found {}", fields.len())));
        }
        let source = fields[0].to_owned();
        let target = fields[1].to_owned();
        if source.is_empty() || target.is_empty() {
            return Err(bad(line, "empty account label"));
        }
        let n: u64 = fields[2]
            .parse()
            .ok()
            .filter(|n| *n >= 1)
            .ok_or_else(|| bad(line, "transaction count must be a positive integer"))?;
        let k: f64 = fields[3]
            .parse()
            .ok()
            .filter(|k: &f64| k.is_finite() && *k >= 0.0)
            .ok_or_else(|| bad(line, "amount must be a non-negative number"))?;
        let y1: i32 = fields[4]
            .parse()
            .map_err(|_| bad(line, "start year must be an integer"))?;
        let y2: i32 = fields[5]
            .parse()
            .map_err(|_| bad(line, "end year must be an integer"))?;
        if y1 > y2 {
            return Err(IngestError::YearOrderViolation {
                file: file.to_owned(),
                line,
                y1,
                y2,
            });
        }

        merged
            .entry((source.clone(), target.clone()))
            .and_modify(|e| {
                e.n += n;
                e.k += k;
                e.y1 = e.y1.min(y1);
                e.y2 = e.y2.max(y2);
            })
            .or_insert(TransactionEdge {
                source,
                target,
                n,
                k,
                y1,
                y2,
            });
    }

    let mut edges: Vec<TransactionEdge> = merged.into_values().collect();
    edges.sort_unstable_by(|a, b| (&a.source, &a.target).cmp(&(&b.source, &b.target)));
    Ok(edges)
}

/// Load every `*.csv` in `dir` as one quarterly snapshot. File stems are
/// the period labels (`2006-03.csv` -> `"2006-03"`). All snapshots are
/// built over the union of countries seen in any quarter, so a country
/// missing from one table appears there as an isolated node.
pub fn load_snapshot_series(dir: &Path) -> Result<SnapshotSeries, IngestError> {
    let mut files: Vec<(String, std::path::PathBuf)> = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| IngestError::Io {
        file: dir.display().to_string(),
        source: e,
    })?;
    for entry in entries {
        let entry = entry.map_err(|e| IngestError::Io {
            file: dir.display().to_string(),
            source: e,
        })?;
        let path = entry.path();
        let is_csv = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
        if path.is_file() && is_csv {
            let period = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_owned();
            files.push((period, path));
        }
    }
    files.sort();
    for pair in files.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(IngestError::DuplicatePeriod {
                period: pair[0].0.clone(),
            });
        }
    }

    let tables: Vec<(String, BisTable)> = files
        .par_iter()
        .map(|(period, path)| {
            let fh = fs::File::open(path).map_err(|e| IngestError::Io {
                file: path.display().to_string(),
                source: e,
            })?;
            let table = parse_bis_csv(fh, &path.display().to_string())?;
            Ok((period.clone(), table))
        })
        .collect::<Result<_, IngestError>>()?;

    let mut universe: Vec<String> = tables
        .iter()
        .flat_map(|(_, t)| t.countries())
        .collect();
    universe.sort_unstable();
    universe.dedup();

    let snapshots: Vec<(String, WeightedDigraph)> = tables
        .par_iter()
        .map(|(period, table)| (period.clone(), bis_to_graph_with_universe(&universe, table)))
        .collect();

    Ok(SnapshotSeries::new(snapshots)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    const TABLE_EXTRACT: &str = "\
Country,Austria,Belgium,Canada,Denmark
Austria,-,\"3,179\",\"1,467\",179
Belgium,152,-,\"2,080\",\"1,291\"
Canada,300,\"1,845\",-,123
Denmark,349,\"3,194\",733,-
France,\"1,665\",\"43,141\",\"4,742\",827
USA,\"3,355\",\"54,947\",\"186,122\",\"3,364\"
UK,\"4,191\",\"62,365\",\"34,328\",\"9,781\"
";

    fn parse(text: &str) -> BisTable {
        parse_bis_csv(Cursor::new(text), "test.csv").unwrap()
    }

    #[test]
    fn table_extract_rows_parse_with_separators_stripped() {
        let t = parse(TABLE_EXTRACT);
        assert_eq!(t.lenders, ["Austria", "Belgium", "Canada", "Denmark"]);
        assert_eq!(t.debtors.len(), 7);
        // Austria owes Belgium 3179, Canada 1467, Denmark 179.
        assert_eq!(t.cells[0], [None, Some(3179.0), Some(1467.0), Some(179.0)]);
        // France owes Belgium 43141.
        assert_eq!(t.cells[4][1], Some(43141.0));
    }

    #[test]
    fn short_row_is_malformed() {
        let text = "Country,Austria,Belgium\nAustria,-\n";
        let err = parse_bis_csv(Cursor::new(text), "test.csv").unwrap_err();
        assert!(matches!(err, IngestError::MalformedRow { line: 2, .. }));
    }

    #[test]
    fn garbage_amount_is_unparseable() {
        let text = "Country,Austria\nBelgium,abc\n";
        let err = parse_bis_csv(Cursor::new(text), "test.csv").unwrap_err();
        assert!(matches!(err, IngestError::UnparseableAmount { .. }));
    }

    #[test]
    fn negative_amount_is_unparseable() {
        let text = "Country,Austria\nBelgium,-5\n";
        let err = parse_bis_csv(Cursor::new(text), "test.csv").unwrap_err();
        assert!(matches!(err, IngestError::UnparseableAmount { .. }));
    }

    #[test]
    fn positive_diagonal_is_rejected() {
        let text = "Country,Austria,Belgium\nAustria,7,1\n";
        let err = parse_bis_csv(Cursor::new(text), "test.csv").unwrap_err();
        assert!(matches!(err, IngestError::DiagonalClaim { .. }));
    }

    #[test]
    fn graph_direction_is_debtor_to_lender() {
        let g = bis_to_graph(&parse(TABLE_EXTRACT));
        let usa = g.node_id("USA").unwrap();
        let canada = g.node_id("Canada").unwrap();
        assert_eq!(g.edge_weight(usa, canada), Some(186_122.0));
        // Out-weight of USA = sum of its row.
        let expected = 3_355.0 + 54_947.0 + 186_122.0 + 3_364.0;
        assert!((g.out_weight_sum(usa) - expected).abs() < 1e-9);
    }

    #[test]
    fn empty_cells_make_isolated_nodes_not_edges() {
        let t = parse("Country,A,B\nC,-,-\nD,,\n");
        let g = bis_to_graph(&t);
        assert_eq!(g.node_count(), 4);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn single_cell_single_edge() {
        let t = parse("Country,B\nA,7\n");
        let g = bis_to_graph(&t);
        assert_eq!(g, WeightedDigraph::from_triples(&[("A", "B", 7.0)]).unwrap());
    }

    #[test]
    fn graph_total_weight_matches_table_total() {
        let t = parse(TABLE_EXTRACT);
        let g = bis_to_graph(&t);
        assert!((g.total_weight() - t.total_amount()).abs() < 1e-9);
    }

    #[test]
    fn transactions_parse_single_record() {
        let edges = parse_transactions(Cursor::new("a1,a2,3,4500,2012,2012"), false, "t.csv").unwrap();
        assert_eq!(
            edges,
            vec![TransactionEdge {
                source: "a1".into(),
                target: "a2".into(),
                n: 3,
                k: 4500.0,
                y1: 2012,
                y2: 2012,
            }]
        );
    }

    #[test]
    fn transactions_merge_duplicate_pairs() {
        let text = "a1,a2,1,100,2011,2011\na1,a2,2,200,2013,2014\n";
        let edges = parse_transactions(Cursor::new(text), false, "t.csv").unwrap();
        assert_eq!(
            edges,
            vec![TransactionEdge {
                source: "a1".into(),
                target: "a2".into(),
                n: 3,
                k: 300.0,
                y1: 2011,
                y2: 2014,
            }]
        );
    }

    #[test]
    fn transactions_year_order_violation() {
        let err =
            parse_transactions(Cursor::new("a1,a2,1,100,2015,2012"), false, "t.csv").unwrap_err();
        assert!(matches!(
            err,
            IngestError::YearOrderViolation { y1: 2015, y2: 2012, .. }
        ));
    }

    #[test]
    fn transactions_reject_zero_count_and_negative_amount() {
        for text in ["a,b,0,10,2012,2012", "a,b,1,-10,2012,2012", "a,b,1,10,2012"] {
            let err = parse_transactions(Cursor::new(text), false, "t.csv").unwrap_err();
            assert!(matches!(err, IngestError::UnparseableRecord { .. }), "{text}");
        }
    }

    #[test]
    fn transactions_header_skipped_on_request() {
        let text = "source,target,n,k,y1,y2\na1,a2,1,100,2012,2012\n";
        let edges = parse_transactions(Cursor::new(text), true, "t.csv").unwrap();
        assert_eq!(edges.len(), 1);
    }

    #[test]
    fn merged_pairs_are_unique_and_counts_add_up() {
        let text = "b,c,1,10,2012,2012\na,b,2,20,2011,2011\nb,c,4,40,2010,2010\na,b,1,5,2013,2013\n";
        let edges = parse_transactions(Cursor::new(text), false, "t.csv").unwrap();
        assert_eq!(edges.len(), 2);
        let total_n: u64 = edges.iter().map(|e| e.n).sum();
        assert_eq!(total_n, 8);
        // Sorted by (source, target).
        assert_eq!(edges[0].source, "a");
        assert_eq!(edges[1].source, "b");
    }

    #[test]
    fn snapshot_series_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("2006-03.csv"), "Country,B\nA,5\n").unwrap();
        std::fs::write(dir.path().join("2006-06.csv"), "Country,C\nA,9\n").unwrap();
        let series = load_snapshot_series(dir.path()).unwrap();
        assert_eq!(series.len(), 2);
        let periods: Vec<&str> = series.periods().collect();
        assert_eq!(periods, ["2006-03", "2006-06"]);
        // Shared universe: A, B, C in both snapshots.
        for (_, g) in series.iter() {
            assert_eq!(g.node_count(), 3);
        }
        let (_, first) = series.get(0).unwrap();
        assert_eq!(first.edge_count(), 1);
    }

    #[test]
    fn snapshot_series_single_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("2000-02.csv"), "Country,B\nA,5\n").unwrap();
        let series = load_snapshot_series(dir.path()).unwrap();
        assert_eq!(series.len(), 1);
    }

    #[test]
    fn duplicate_period_stems_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("2006-03.csv"), "Country,B\nA,5\n").unwrap();
        std::fs::write(dir.path().join("2006-03.CSV"), "Country,B\nA,5\n").unwrap();
        let err = load_snapshot_series(dir.path()).unwrap_err();
        assert!(matches!(err, IngestError::DuplicatePeriod { .. }));
    }
}
