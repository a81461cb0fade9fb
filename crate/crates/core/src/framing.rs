//! One resource block: subcarriers by OFDM symbols, time-shared among users.

use crate::constellation::Label;
use crate::error::{Error, Result};
use crate::mapping::{AllocationPlan, UserId};

/// Resource-block and OFDM numerology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RbGeometry {
    pub subcarriers: usize,
    /// 7 (LTE) or 14 (NR).
    pub symbols_per_slot: usize,
    pub fft_size: usize,
    /// First occupied FFT bin.
    pub subcarrier_offset: usize,
    pub cp_length: usize,
}

impl Default for RbGeometry {
    fn default() -> Self {
        Self {
            subcarriers: 12,
            symbols_per_slot: 14,
            fft_size: 256,
            subcarrier_offset: 16,
            cp_length: 32,
        }
    }
}

impl RbGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.symbols_per_slot != 7 && self.symbols_per_slot != 14 {
            return Err(Error::Geometry(format!(
                "a slot holds 7 or 14 OFDM symbols, got {}",
                self.symbols_per_slot
            )));
        }
        if self.subcarriers == 0 {
            return Err(Error::Geometry("no subcarriers".into()));
        }
        if self.fft_size < 4 {
            return Err(Error::Geometry(format!(
                "FFT size {} too small",
                self.fft_size
            )));
        }
        if self.subcarrier_offset < 1 {
            return Err(Error::Geometry("the DC bin must stay empty".into()));
        }
        if self.subcarrier_offset + self.subcarriers > self.fft_size / 2 {
            return Err(Error::Geometry(format!(
                "bins {}..{} do not fit below Nyquist of a {}-point FFT",
                self.subcarrier_offset,
                self.subcarrier_offset + self.subcarriers,
                self.fft_size
            )));
        }
        if self.cp_length >= self.fft_size {
            return Err(Error::Geometry(format!(
                "cyclic prefix {} not shorter than the FFT size {}",
                self.cp_length, self.fft_size
            )));
        }
        Ok(())
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_length
    }

    /// Constellation symbols carried by one slot.
    pub fn cells_per_slot(&self) -> usize {
        self.subcarriers * self.symbols_per_slot
    }
}

/// Owner of each OFDM symbol in a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotSchedule {
    assignments: Vec<UserId>,
}

impl SlotSchedule {
    pub fn from_assignments(assignments: Vec<UserId>) -> Result<Self> {
        if assignments.is_empty() {
            return Err(Error::InvalidSchedule("empty slot".into()));
        }
        Ok(Self { assignments })
    }

    pub fn assignments(&self) -> &[UserId] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Number of symbols owned by `user`.
    pub fn count(&self, user: UserId) -> usize {
        self.assignments.iter().filter(|&&u| u == user).count()
    }

    /// Checks the schedule against a plan and a geometry.
    pub fn validate(&self, plan: &AllocationPlan, geometry: &RbGeometry) -> Result<()> {
        if self.assignments.len() != geometry.symbols_per_slot {
            return Err(Error::InvalidSchedule(format!(
                "schedule covers {} symbols, slot has {}",
                self.assignments.len(),
                geometry.symbols_per_slot
            )));
        }
        if let Some(u) = self.assignments.iter().find(|&&u| plan.user(u).is_none()) {
            return Err(Error::InvalidSchedule(format!(
                "user {u} is not part of the allocation plan"
            )));
        }
        Ok(())
    }
}

/// `assignment[k] = users[k mod len(users)]`.
pub fn round_robin_schedule(users: &[UserId], symbols_per_slot: usize) -> Result<SlotSchedule> {
    if users.is_empty() {
        return Err(Error::InvalidSchedule("no users to schedule".into()));
    }
    SlotSchedule::from_assignments(
        (0..symbols_per_slot)
            .map(|k| users[k % users.len()])
            .collect(),
    )
}

/// Proportional schedule with largest-remainder rounding.
///
/// Counts are `floor(S * w_i / W)` plus one extra symbol for the largest
/// fractional remainders (ties to the lower user index). The symbols are then
/// interleaved with smooth weighted round-robin so a user's share is spread
/// over the slot.
pub fn weighted_schedule(
    users: &[UserId],
    weights: &[u32],
    symbols_per_slot: usize,
) -> Result<SlotSchedule> {
    if users.is_empty() {
        return Err(Error::InvalidSchedule("no users to schedule".into()));
    }
    if users.len() != weights.len() {
        return Err(Error::InvalidSchedule(format!(
            "{} users but {} weights",
            users.len(),
            weights.len()
        )));
    }
    let total: u64 = weights.iter().map(|&w| w as u64).sum();
    if total == 0 {
        return Err(Error::InvalidSchedule("total weight is zero".into()));
    }

    let slots = symbols_per_slot as u64;
    let mut counts: Vec<u64> = weights.iter().map(|&w| slots * w as u64 / total).collect();
    let remainders: Vec<u64> = weights.iter().map(|&w| slots * w as u64 % total).collect();
    let mut order: Vec<usize> = (0..users.len()).collect();
    // stable sort keeps lower indices first among equal remainders
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]));
    let leftover = slots - counts.iter().sum::<u64>();
    for &i in order.iter().take(leftover as usize) {
        counts[i] += 1;
    }

    let mut credit = vec![0i64; users.len()];
    let mut left = counts.clone();
    let mut assignments = Vec::with_capacity(symbols_per_slot);
    for _ in 0..symbols_per_slot {
        for (c, &n) in credit.iter_mut().zip(&counts) {
            *c += n as i64;
        }
        let pick = (0..users.len())
            .filter(|&i| left[i] > 0)
            .max_by(|&a, &b| credit[a].cmp(&credit[b]).then(b.cmp(&a)))
            .expect("counts sum to the slot length");
        credit[pick] -= slots as i64;
        left[pick] -= 1;
        assignments.push(users[pick]);
    }
    SlotSchedule::from_assignments(assignments)
}

/// Labels of one slot, row-major by OFDM symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid {
    symbols: usize,
    subcarriers: usize,
    labels: Vec<Label>,
    owners: Vec<UserId>,
}

impl LabelGrid {
    pub fn new(
        symbols: usize,
        subcarriers: usize,
        labels: Vec<Label>,
        owners: Vec<UserId>,
    ) -> Result<Self> {
        if labels.len() != symbols * subcarriers || owners.len() != symbols {
            return Err(Error::Geometry(format!(
                "{} labels / {} owners do not form a {symbols}x{subcarriers} grid",
                labels.len(),
                owners.len()
            )));
        }
        Ok(Self {
            symbols,
            subcarriers,
            labels,
            owners,
        })
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn get(&self, symbol: usize, subcarrier: usize) -> Label {
        self.labels[symbol * self.subcarriers + subcarrier]
    }

    pub fn symbol(&self, symbol: usize) -> &[Label] {
        &self.labels[symbol * self.subcarriers..(symbol + 1) * self.subcarriers]
    }

    /// User scheduled on each OFDM symbol.
    pub fn owners(&self) -> &[UserId] {
        &self.owners
    }

    /// CSV cells `symbol,subcarrier,label_binary,user_id`, with a header.
    pub fn to_csv(&self, bits_per_symbol: u32) -> String {
        let width = bits_per_symbol as usize;
        let mut out = String::from("symbol,subcarrier,label_binary,user_id\n");
        for s in 0..self.symbols {
            for k in 0..self.subcarriers {
                out.push_str(&format!(
                    "{s},{k},{:0width$b},{}\n",
                    self.get(s, k),
                    self.owners[s]
                ));
            }
        }
        out
    }
}

/// Fills one slot from per-user data-word streams.
///
/// `streams[i]` belongs to `plan.users()[i]`. Each scheduled symbol takes the
/// owner's next `subcarriers` words, lowest subcarrier first.
pub fn frame_user_data(
    plan: &AllocationPlan,
    schedule: &SlotSchedule,
    geometry: &RbGeometry,
    streams: &[&[u32]],
) -> Result<LabelGrid> {
    schedule.validate(plan, geometry)?;
    if streams.len() != plan.users().len() {
        return Err(Error::InvalidSchedule(format!(
            "{} data streams for {} users",
            streams.len(),
            plan.users().len()
        )));
    }
    let owner_index: Vec<usize> = schedule
        .assignments()
        .iter()
        .map(|&u| plan.user_index(u).expect("validated"))
        .collect();
    for (i, user) in plan.users().iter().enumerate() {
        let needed = owner_index.iter().filter(|&&o| o == i).count() * geometry.subcarriers;
        if streams[i].len() < needed {
            return Err(Error::InsufficientData {
                user: user.user_id(),
                needed,
                available: streams[i].len(),
            });
        }
    }

    let mut cursor = vec![0usize; streams.len()];
    let mut labels = Vec::with_capacity(geometry.cells_per_slot());
    for &i in &owner_index {
        let user = &plan.users()[i];
        for &word in &streams[i][cursor[i]..cursor[i] + geometry.subcarriers] {
            labels.push(plan.map_symbol(user.user_id(), word)?);
        }
        cursor[i] += geometry.subcarriers;
    }
    LabelGrid::new(
        geometry.symbols_per_slot,
        geometry.subcarriers,
        labels,
        schedule.assignments().to_vec(),
    )
}
