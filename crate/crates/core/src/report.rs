//! Simulation reports and their CSV form.

use crate::channel::SnrMode;
use crate::harness::Tally;
use crate::mapping::UserId;

/// Column header of a single report.
pub const REPORT_COLUMNS: &str = "snr_db,snr_mode,user_id,symbols_sent,symbol_errors,ser,data_bits_sent,data_bit_errors,ber,user_confusions,theory_ser,theory_ber";

#[derive(Debug, Clone, PartialEq)]
pub struct UserTally {
    pub user_id: UserId,
    pub tally: Tally,
}

/// Counts of one SNR point, per user and summed.
#[derive(Debug, Clone, PartialEq)]
pub struct SnrPointReport {
    pub snr_db: f64,
    pub snr_mode: SnrMode,
    /// Linear SNR per symbol the channel was run at.
    pub symbol_snr: f64,
    pub users: Vec<UserTally>,
    pub aggregate: Tally,
    pub theory_ser: f64,
    pub theory_ber: f64,
}

impl SnrPointReport {
    pub fn new(
        snr_db: f64,
        snr_mode: SnrMode,
        symbol_snr: f64,
        users: Vec<UserTally>,
        theory_ser: f64,
        theory_ber: f64,
    ) -> Self {
        let mut aggregate = Tally::default();
        for u in &users {
            aggregate += u.tally;
        }
        Self {
            snr_db,
            snr_mode,
            symbol_snr,
            users,
            aggregate,
            theory_ser,
            theory_ber,
        }
    }

    pub fn user(&self, user_id: UserId) -> Option<&Tally> {
        self.users
            .iter()
            .find(|u| u.user_id == user_id)
            .map(|u| &u.tally)
    }
}

/// Result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct BerReport {
    pub name: String,
    pub order: u32,
    pub points: Vec<SnrPointReport>,
}

fn push_row(out: &mut String, point: &SnrPointReport, user: i64, t: &Tally) {
    out.push_str(&format!(
        "{},{},{},{},{},{:.9e},{},{},{:.9e},{},{:.9e},{:.9e}\n",
        point.snr_db,
        point.snr_mode,
        user,
        t.symbols_sent,
        t.symbol_errors,
        t.ser(),
        t.data_bits_sent,
        t.data_bit_errors,
        t.ber(),
        t.user_confusions,
        point.theory_ser,
        point.theory_ber,
    ));
}

impl BerReport {
    /// Per-user rows followed by the aggregate row (`user_id = -1`) for each
    /// SNR point, under [`REPORT_COLUMNS`].
    pub fn to_csv(&self) -> String {
        let mut out = format!("{REPORT_COLUMNS}\n");
        self.write_rows(&mut out, None);
        out
    }

    fn write_rows(&self, out: &mut String, run: Option<&str>) {
        for point in &self.points {
            let rows = point
                .users
                .iter()
                .map(|u| (u.user_id as i64, &u.tally))
                .chain(std::iter::once((-1, &point.aggregate)));
            for (user, tally) in rows {
                if let Some(run) = run {
                    out.push_str(run);
                    out.push(',');
                }
                push_row(out, point, user, tally);
            }
        }
    }

    /// Aggregate-only text table.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{} ({}-QAM)\n{:>8} {:>8} {:>12} {:>12} {:>12} {:>12}\n",
            self.name, self.order, "snr_db", "mode", "ser", "theory_ser", "ber", "theory_ber"
        );
        for p in &self.points {
            out.push_str(&format!(
                "{:>8} {:>8} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}\n",
                p.snr_db,
                p.snr_mode,
                p.aggregate.ser(),
                p.theory_ser,
                p.aggregate.ber(),
                p.theory_ber
            ));
        }
        out
    }
}

/// Several reports in one CSV, distinguished by a leading `run` column.
pub fn reports_to_csv(reports: &[BerReport]) -> String {
    let mut out = format!("run,{REPORT_COLUMNS}\n");
    for r in reports {
        r.write_rows(&mut out, Some(&r.name));
    }
    out
}

/// gnuplot script plotting aggregate BER of every run in `csv_path` (a file
/// written by [`reports_to_csv`]).
pub fn gnuplot_script(reports: &[BerReport], csv_path: &str) -> String {
    let mut out = String::from(
        "set datafile separator ','\nset logscale y\nset grid\nset key bottom left\n\
         set ylabel 'BER'\nset format y '10^{%L}'\n",
    );
    let mode = reports
        .first()
        .and_then(|r| r.points.first())
        .map_or("symbol", |p| p.snr_mode.as_str());
    out.push_str(&format!("set xlabel 'SNR per {mode} (dB)'\nplot \\\n"));
    let plots: Vec<String> = reports
        .iter()
        .map(|r| {
            format!(
                "  '{csv_path}' using (strcol(1) eq '{name}' && $4 == -1 ? $2 : 1/0):10 \
                 with linespoints title '{name}', \\\n  \
                 '{csv_path}' using (strcol(1) eq '{name}' && $4 == -1 ? $2 : 1/0):13 \
                 with lines dashtype 2 title '{name} (theory)'",
                name = r.name
            )
        })
        .collect();
    out.push_str(&plots.join(", \\\n"));
    out.push('\n');
    out
}
