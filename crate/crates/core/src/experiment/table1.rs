use std::fmt;

use serde::Serialize;

use crate::activity::{utilization, ActivityClass, RateTableEntry, RATE_TABLE};

pub const TABLE_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCheckRow {
    pub channel: u32,
    pub class: ActivityClass,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub computed: Option<f64>,
    pub listed: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableCheckReport {
    pub tolerance: f64,
    pub rows: Vec<TableCheckRow>,
}

impl TableCheckReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TableCheckRow> {
        self.rows.iter().filter(|r| !r.pass)
    }
}

impl fmt::Display for TableCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.rows {
            let computed = r
                .computed
                .map_or_else(|| "invalid".to_string(), |u| format!("{u:.4}"));
            writeln!(
                f,
                "CH-{:<2} {:<4}  lx={:<7} ly={:<5} U={:<7} listed={:.2}  {}",
                r.channel,
                r.class,
                r.lambda_x,
                r.lambda_y,
                computed,
                r.listed,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        let failed = self.rows.iter().filter(|r| !r.pass).count();
        write!(
            f,
            "{} of {} channels within ±{}: {}",
            self.rows.len() - failed,
            self.rows.len(),
            self.tolerance,
            if failed == 0 { "PASS" } else { "FAIL" }
        )
    }
}

/// Recomputes utilization from every rate pair and compares it with the
/// listed value.
pub fn check_rate_table(table: &[RateTableEntry], tolerance: f64) -> TableCheckReport {
    let rows = table
        .iter()
        .map(|e| {
            let computed = utilization(e.rates()).ok();
            let pass = computed.is_some_and(|u| (u - e.utilization).abs() <= tolerance);
            TableCheckRow {
                channel: e.channel,
                class: e.class,
                lambda_x: e.lambda_x,
                lambda_y: e.lambda_y,
                computed,
                listed: e.utilization,
                pass,
            }
        })
        .collect();
    TableCheckReport { tolerance, rows }
}

/// Checks the built-in reference table.
pub fn check_table1() -> TableCheckReport {
    check_rate_table(&RATE_TABLE, TABLE_TOLERANCE)
}
