//! Golden-table comparison. Rows are matched by `(Year, Chart)`; cells are
//! compared after trimming. A golden cell `*` matches anything, and a
//! golden cell ending in `*` matches by prefix.

use std::collections::HashMap;

/// Header and rows of a pipe table; separator lines are skipped.
pub fn parse_table(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rows = text
        .lines()
        .map(str::trim)
        .filter(|l| l.starts_with('|'))
        .filter(|l| !l.chars().all(|c| matches!(c, '|' | '-' | ' ' | ':')))
        .map(|l| {
            let inner = l.trim_start_matches('|').trim_end_matches('|');
            inner.split('|').map(|c| c.trim().to_string()).collect::<Vec<_>>()
        });
    let header = rows.next().unwrap_or_default();
    (header, rows.collect())
}

/// Differences of `actual` against `golden`, one line per mismatch naming
/// the year, chart and column. Rows absent from the golden table are not
/// reported.
pub fn diff(actual: &str, golden: &str) -> Vec<String> {
    let (gh, grows) = parse_table(golden);
    let (ah, arows) = parse_table(actual);
    let mut report = Vec::new();
    let col = |h: &[String], name: &str| h.iter().position(|c| c == name);
    let (Some(gy), Some(gc), Some(ay), Some(ac)) =
        (col(&gh, "Year"), col(&gh, "Chart"), col(&ah, "Year"), col(&ah, "Chart"))
    else {
        report.push("table without Year and Chart columns".to_string());
        return report;
    };
    let index: HashMap<(String, String), &Vec<String>> =
        arows.iter().filter(|r| r.len() > ay.max(ac)).map(|r| ((r[ay].clone(), r[ac].clone()), r)).collect();
    for g in &grows {
        let (Some(year), Some(chart)) = (g.get(gy), g.get(gc)) else {
            report.push(format!("malformed golden row {g:?}"));
            continue;
        };
        let Some(a) = index.get(&(year.clone(), chart.clone())) else {
            report.push(format!("year {year} chart {chart}: row missing"));
            continue;
        };
        for (k, name) in gh.iter().enumerate() {
            let want = g.get(k).map(String::as_str).unwrap_or("");
            let got = col(&ah, name).and_then(|j| a.get(j)).map(String::as_str);
            match got {
                Some(v) if cell_matches(want, v) => {}
                Some(v) => {
                    report.push(format!("year {year} chart {chart} column {name}: expected {want:?}, got {v:?}"))
                }
                None => report.push(format!("year {year} chart {chart} column {name}: column missing")),
            }
        }
    }
    report
}

fn cell_matches(want: &str, got: &str) -> bool {
    match want.strip_suffix('*') {
        Some(prefix) => got.starts_with(prefix.trim_end()),
        None => want == got,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: &str =
        "| Year | Chart | inv |\n|------|-------|-----|\n| 0 | U | (2,0; inf) |\n| 1 | U_x | (1,0; inf) |\n";

    #[test]
    fn identical_tables_match() {
        assert!(diff(T, T).is_empty());
    }

    #[test]
    fn wildcard_and_subset() {
        let golden = "| Year | Chart | inv |\n| 1 | U_x | * |\n";
        assert!(diff(T, golden).is_empty());
        let golden = "| Year | Chart | inv |\n| 0 | U | (2,0;* |\n";
        assert!(diff(T, golden).is_empty());
        let golden = "| Year | Chart | inv |\n| 0 | U | (3,0;* |\n";
        assert_eq!(diff(T, golden).len(), 1);
    }

    #[test]
    fn perturbation_names_year_and_column() {
        let golden = T.replace("(1,0; inf)", "(1,1; inf)");
        let r = diff(T, &golden);
        assert_eq!(r.len(), 1);
        assert!(r[0].contains("year 1") && r[0].contains("column inv"), "{r:?}");
    }

    #[test]
    fn missing_row_reported() {
        let golden = "| Year | Chart | inv |\n| 2 | U_xy | * |\n";
        assert_eq!(diff(T, golden), ["year 2 chart U_xy: row missing"]);
    }
}
