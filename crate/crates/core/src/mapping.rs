//! Sharing one QAM alphabet among several users.
//!
//! Two ways of separating users are supported. An address-bit plan reserves
//! fixed label bit positions for a user address and fills the rest with data.
//! A lookup-table plan lists the codeword of every (user, data word) pair
//! explicitly, which also covers non-uniform (QoS) allocations.

use std::collections::HashSet;

use num_rational::Ratio;

use crate::constellation::{validate_order, Label};
use crate::error::{Error, Result};

pub type UserId = u32;

/// Number of users a shared `order`-QAM alphabet can carry when each user
/// sends `data_bits` bits per symbol: `2^(log2 M - B)`.
pub fn capacity_enhancement(order: u32, data_bits: u32) -> Result<u64> {
    let d = validate_order(order as u64)?;
    if data_bits < 1 || data_bits > d {
        return Err(Error::InvalidWidth(format!(
            "data width {data_bits} outside 1..={d} for {order}-QAM"
        )));
    }
    Ok(1u64 << (d - data_bits))
}

/// Per-user throughput relative to a dedicated modulator when `address_bits`
/// of the `log2 M` label bits identify the user: `(D - A) / (D * 2^A)`.
pub fn throughput_reduction(order: u32, address_bits: u32) -> Result<Ratio<u64>> {
    let d = validate_order(order as u64)?;
    if address_bits >= d {
        return Err(Error::InvalidWidth(format!(
            "address width {address_bits} outside 0..={} for {order}-QAM",
            d - 1
        )));
    }
    Ok(Ratio::new(
        (d - address_bits) as u64,
        d as u64 * (1u64 << address_bits),
    ))
}

/// Bit positions of the address field within a D-bit label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddressBitLayout {
    order: u32,
    bits_per_symbol: u32,
    /// Descending.
    address_positions: Vec<u32>,
    /// Descending.
    data_positions: Vec<u32>,
}

impl AddressBitLayout {
    pub fn new(order: u32, address_positions: &[u32]) -> Result<Self> {
        let d = validate_order(order as u64)?;
        let mut address: Vec<u32> = address_positions.to_vec();
        address.sort_unstable_by(|a, b| b.cmp(a));
        address.dedup();
        if address.len() != address_positions.len() {
            return Err(Error::InvalidLayout("repeated address bit position".into()));
        }
        if address.is_empty() || address.len() as u32 > d - 1 {
            return Err(Error::InvalidLayout(format!(
                "need between 1 and {} address bits, got {}",
                d - 1,
                address.len()
            )));
        }
        if let Some(&p) = address.iter().find(|&&p| p >= d) {
            return Err(Error::InvalidLayout(format!(
                "bit position {p} outside a {d}-bit label"
            )));
        }
        let data = (0..d).rev().filter(|p| !address.contains(p)).collect();
        Ok(Self {
            order,
            bits_per_symbol: d,
            address_positions: address,
            data_positions: data,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn address_bits(&self) -> u32 {
        self.address_positions.len() as u32
    }

    pub fn data_bits(&self) -> u32 {
        self.data_positions.len() as u32
    }

    pub fn address_positions(&self) -> &[u32] {
        &self.address_positions
    }

    pub fn data_positions(&self) -> &[u32] {
        &self.data_positions
    }

    /// Label carrying `address` and `data`, most significant bit of each
    /// field at its highest position.
    pub fn compose(&self, address: u32, data: u32) -> Label {
        scatter(address, &self.address_positions) | scatter(data, &self.data_positions)
    }

    pub fn address_of(&self, label: Label) -> u32 {
        gather(label, &self.address_positions)
    }

    pub fn data_of(&self, label: Label) -> u32 {
        gather(label, &self.data_positions)
    }
}

fn scatter(value: u32, positions: &[u32]) -> u32 {
    let width = positions.len();
    positions
        .iter()
        .enumerate()
        .map(|(j, &pos)| ((value >> (width - 1 - j)) & 1) << pos)
        .fold(0, |acc, b| acc | b)
}

fn gather(label: Label, positions: &[u32]) -> u32 {
    positions
        .iter()
        .fold(0, |acc, &pos| (acc << 1) | ((label >> pos) & 1))
}

/// Which separation scheme produced a plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchemeKind {
    AddressBit(AddressBitLayout),
    LookupTable,
}

/// One user's share of the alphabet. Position `k` of `codewords` encodes data
/// word `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserAllocation {
    user_id: UserId,
    data_bits: u32,
    codewords: Vec<Label>,
}

impl UserAllocation {
    pub fn user_id(&self) -> UserId {
        self.user_id
    }

    pub fn data_bits(&self) -> u32 {
        self.data_bits
    }

    pub fn codewords(&self) -> &[Label] {
        &self.codewords
    }
}

/// Result of demapping a detected label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Demapped {
    User { user_id: UserId, data_word: u32 },
    Unallocated,
}

/// Partition of the label space among users.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationPlan {
    order: u32,
    bits_per_symbol: u32,
    users: Vec<UserAllocation>,
    scheme: SchemeKind,
    /// Per label: (user index, data word).
    owner: Vec<Option<(usize, u32)>>,
}

impl AllocationPlan {
    /// Validates the allocation invariants and builds the reverse map.
    fn assemble(order: u32, users: Vec<UserAllocation>, scheme: SchemeKind) -> Result<Self> {
        let d = validate_order(order as u64)?;
        let mut ids = HashSet::new();
        let mut owner = vec![None; order as usize];
        for (idx, user) in users.iter().enumerate() {
            if !ids.insert(user.user_id) {
                return Err(Error::IncompleteTable(format!(
                    "user {} declared twice",
                    user.user_id
                )));
            }
            if user.data_bits < 1 || user.data_bits > d {
                return Err(Error::InvalidWidth(format!(
                    "user {} has data width {} outside 1..={d}",
                    user.user_id, user.data_bits
                )));
            }
            if user.codewords.len() != 1usize << user.data_bits {
                return Err(Error::IncompleteTable(format!(
                    "user {} has {} codewords, expected {}",
                    user.user_id,
                    user.codewords.len(),
                    1usize << user.data_bits
                )));
            }
            for (word, &cw) in user.codewords.iter().enumerate() {
                if cw >= order {
                    return Err(Error::Lookup(format!(
                        "codeword {cw:#b} is not a {d}-bit label"
                    )));
                }
                let slot = &mut owner[cw as usize];
                if slot.is_some() {
                    return Err(Error::Overlap { codeword: cw });
                }
                *slot = Some((idx, word as u32));
            }
        }
        Ok(Self {
            order,
            bits_per_symbol: d,
            users,
            scheme,
            owner,
        })
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn users(&self) -> &[UserAllocation] {
        &self.users
    }

    pub fn scheme(&self) -> &SchemeKind {
        &self.scheme
    }

    pub fn user_ids(&self) -> Vec<UserId> {
        self.users.iter().map(|u| u.user_id).collect()
    }

    pub fn user_index(&self, user_id: UserId) -> Option<usize> {
        self.users.iter().position(|u| u.user_id == user_id)
    }

    pub fn user(&self, user_id: UserId) -> Option<&UserAllocation> {
        self.users.iter().find(|u| u.user_id == user_id)
    }

    /// Data width shared by every user, if there is one.
    pub fn uniform_data_bits(&self) -> Option<u32> {
        let first = self.users.first()?.data_bits;
        self.users
            .iter()
            .all(|u| u.data_bits == first)
            .then_some(first)
    }

    /// `D - B` for uniform plans; mixed-width plans have no single value.
    pub fn address_bits(&self) -> Option<u32> {
        self.uniform_data_bits().map(|b| self.bits_per_symbol - b)
    }

    /// Number of labels assigned to some user.
    pub fn allocated_labels(&self) -> usize {
        self.owner.iter().filter(|o| o.is_some()).count()
    }

    pub fn map_symbol(&self, user_id: UserId, data_word: u32) -> Result<Label> {
        let user = self
            .user(user_id)
            .ok_or_else(|| Error::Lookup(format!("unknown user {user_id}")))?;
        user.codewords
            .get(data_word as usize)
            .copied()
            .ok_or_else(|| {
                Error::Lookup(format!(
                    "data word {data_word} does not fit in {} bits for user {user_id}",
                    user.data_bits
                ))
            })
    }

    /// Codeword for the user at plan position `index`. Panics on an
    /// out-of-range data word.
    pub fn map_by_index(&self, index: usize, data_word: u32) -> Label {
        self.users[index].codewords[data_word as usize]
    }

    pub fn demap_symbol(&self, label: Label) -> Demapped {
        match self.owner.get(label as usize).copied().flatten() {
            Some((idx, data_word)) => Demapped::User {
                user_id: self.users[idx].user_id,
                data_word,
            },
            None => Demapped::Unallocated,
        }
    }

    /// (user index, data word) owning `label`.
    pub fn owner_of(&self, label: Label) -> Option<(usize, u32)> {
        self.owner.get(label as usize).copied().flatten()
    }

    /// Throughput reduction of a uniform plan.
    pub fn throughput_reduction(&self) -> Result<Ratio<u64>> {
        let a = self.address_bits().ok_or_else(|| {
            Error::InvalidWidth("throughput reduction needs a uniform data width".into())
        })?;
        throughput_reduction(self.order, a)
    }
}

/// Every label split into 2^A users by the address field.
pub fn build_address_bit_plan(layout: &AddressBitLayout) -> Result<AllocationPlan> {
    let users = (0..1u32 << layout.address_bits())
        .map(|address| UserAllocation {
            user_id: address,
            data_bits: layout.data_bits(),
            codewords: (0..1u32 << layout.data_bits())
                .map(|data| layout.compose(address, data))
                .collect(),
        })
        .collect();
    AllocationPlan::assemble(
        layout.order(),
        users,
        SchemeKind::AddressBit(layout.clone()),
    )
}

/// One row of an explicit lookup table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LookupRow {
    pub user_id: UserId,
    pub data_word: u32,
    /// Width of the user's data words.
    pub data_bits: u32,
    pub codeword: Label,
}

/// Builds a plan verbatim from table rows. Users keep the order of their first
/// appearance.
pub fn build_lookup_plan(order: u32, table: &[LookupRow]) -> Result<AllocationPlan> {
    let d = validate_order(order as u64)?;
    let mut users: Vec<(UserId, u32, Vec<Option<Label>>)> = Vec::new();
    let mut used = HashSet::new();
    for row in table {
        if row.codeword >= order {
            return Err(Error::Lookup(format!(
                "codeword {:#b} is not a {d}-bit label",
                row.codeword
            )));
        }
        if !used.insert(row.codeword) {
            return Err(Error::Overlap {
                codeword: row.codeword,
            });
        }
        if row.data_bits < 1 || row.data_bits > d {
            return Err(Error::InvalidWidth(format!(
                "user {} has data width {} outside 1..={d}",
                row.user_id, row.data_bits
            )));
        }
        let entry = match users.iter_mut().find(|(id, _, _)| *id == row.user_id) {
            Some(entry) => entry,
            None => {
                users.push((row.user_id, row.data_bits, vec![None; 1 << row.data_bits]));
                users.last_mut().unwrap()
            }
        };
        if entry.1 != row.data_bits {
            return Err(Error::InvalidWidth(format!(
                "user {} mixes data widths {} and {}",
                row.user_id, entry.1, row.data_bits
            )));
        }
        let slot = entry.2.get_mut(row.data_word as usize).ok_or_else(|| {
            Error::Lookup(format!(
                "data word {} does not fit in {} bits",
                row.data_word, row.data_bits
            ))
        })?;
        if slot.is_some() {
            return Err(Error::IncompleteTable(format!(
                "user {} lists data word {} twice",
                row.user_id, row.data_word
            )));
        }
        *slot = Some(row.codeword);
    }

    let users = users
        .into_iter()
        .map(|(user_id, data_bits, words)| {
            let codewords = words
                .iter()
                .enumerate()
                .map(|(w, cw)| {
                    cw.ok_or_else(|| {
                        Error::IncompleteTable(format!(
                            "user {user_id} is missing data word {w:0width$b}",
                            width = data_bits as usize
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(UserAllocation {
                user_id,
                data_bits,
                codewords,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    AllocationPlan::assemble(order, users, SchemeKind::LookupTable)
}

/// Non-uniform allocation: user `i` (id `i`) gets `2^bits_per_user[i]`
/// codewords. Labels are dealt out in ascending order, cycling over the users
/// that still need codewords, so every user's subset spreads over the grid.
pub fn build_qos_plan(order: u32, bits_per_user: &[u32]) -> Result<AllocationPlan> {
    let d = validate_order(order as u64)?;
    if bits_per_user.is_empty() {
        return Err(Error::InvalidWidth("no users given".into()));
    }
    if let Some(&b) = bits_per_user.iter().find(|&&b| b < 1 || b > d) {
        return Err(Error::InvalidWidth(format!(
            "data width {b} outside 1..={d} for {order}-QAM"
        )));
    }
    let needed: u64 = bits_per_user.iter().map(|&b| 1u64 << b).sum();
    if needed > order as u64 {
        return Err(Error::Overflow {
            needed,
            available: order as u64,
        });
    }

    let mut codewords: Vec<Vec<Label>> = bits_per_user
        .iter()
        .map(|&b| Vec::with_capacity(1 << b))
        .collect();
    let mut next_user = 0;
    for label in 0..needed as u32 {
        while codewords[next_user].len() == 1 << bits_per_user[next_user] {
            next_user = (next_user + 1) % bits_per_user.len();
        }
        codewords[next_user].push(label);
        next_user = (next_user + 1) % bits_per_user.len();
    }

    let users = codewords
        .into_iter()
        .zip(bits_per_user)
        .enumerate()
        .map(|(i, (codewords, &data_bits))| UserAllocation {
            user_id: i as UserId,
            data_bits,
            codewords,
        })
        .collect();
    AllocationPlan::assemble(order, users, SchemeKind::LookupTable)
}

/// A single user owning the whole alphabet, data word = label.
pub fn build_single_user_plan(order: u32) -> Result<AllocationPlan> {
    let d = validate_order(order as u64)?;
    build_qos_plan(order, &[d])
}

/// Parses lookup-table text: one `user_id,data_word_binary,codeword_binary`
/// row per line, `#` starts a comment.
pub fn parse_lookup_table(text: &str) -> Result<Vec<LookupRow>> {
    let mut rows = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: n + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(parse_err(format!(
                "expected `user_id,data_word,codeword`, got {} fields",
                fields.len()
            )));
        }
        let user_id = fields[0]
            .parse::<UserId>()
            .map_err(|_| parse_err(format!("bad user id `{}`", fields[0])))?;
        let binary = |s: &str, what: &str| {
            if s.is_empty() || s.len() > 16 {
                return Err(parse_err(format!("bad {what} `{s}`")));
            }
            u32::from_str_radix(s, 2).map_err(|_| parse_err(format!("bad {what} `{s}`")))
        };
        let data_word = binary(fields[1], "data word")?;
        let codeword = binary(fields[2], "codeword")?;
        rows.push(LookupRow {
            user_id,
            data_word,
            data_bits: fields[1].len() as u32,
            codeword,
        });
    }
    Ok(rows)
}

/// Renders a plan as lookup-table text that [`parse_lookup_table`] reads back.
pub fn format_lookup_table(plan: &AllocationPlan) -> String {
    let d = plan.bits_per_symbol() as usize;
    let mut out = String::new();
    for user in plan.users() {
        let b = user.data_bits() as usize;
        for (word, cw) in user.codewords().iter().enumerate() {
            out.push_str(&format!("{},{word:0b$b},{cw:0d$b}\n", user.user_id()));
        }
    }
    out
}
