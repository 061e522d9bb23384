//! The 41-class phoneme inventory and its 18-slot place/manner encoding.
//!
//! 39 ARPAbet phonemes plus `sil` and `spn`. Consonants set one
//! (place, manner) slot; vowels set a height slot and, unless central, a
//! frontness slot. Silence and spoken noise encode as the zero vector. The
//! table itself lives in `data/inventory_v1.tsv`.

use std::sync::OnceLock;

use super::FeatError;
use crate::matrix::Matrix;

pub const N_PHONEME_CLASSES: usize = 41;
pub const PM_DIMS: usize = 18;
pub const SILENCE: &str = "sil";
pub const INVENTORY_TSV: &str = include_str!("../../data/inventory_v1.tsv");
const INVENTORY_HEADER: &str = "# aai phoneme inventory v1";

pub const VOWELS: [&str; 15] =
    ["AA", "AE", "AH", "AO", "AW", "AY", "EH", "ER", "EY", "IH", "IY", "OW", "OY", "UH", "UW"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceManner {
    pub place: String,
    pub manner: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhonemeInventory {
    pub slots: Vec<PlaceManner>,
    /// `(label, slot indices)` in class-id order.
    pub entries: Vec<(String, Vec<usize>)>,
}

impl PhonemeInventory {
    pub fn builtin() -> &'static PhonemeInventory {
        static INV: OnceLock<PhonemeInventory> = OnceLock::new();
        INV.get_or_init(|| parse_inventory_tsv(INVENTORY_TSV).expect("shipped inventory table is valid"))
    }

    pub fn class_id(&self, label: &str) -> Option<usize> {
        self.entries.iter().position(|(l, _)| l == label)
    }

    pub fn pm_vector(&self, class_id: usize) -> [f64; PM_DIMS] {
        let mut v = [0.0; PM_DIMS];
        for &s in &self.entries[class_id].1 {
            v[s] = 1.0;
        }
        v
    }
}

pub fn parse_inventory_tsv(text: &str) -> Result<PhonemeInventory, FeatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == INVENTORY_HEADER => {}
        _ => return Err(FeatError::Parse { line: 1, msg: "missing inventory version header".into() }),
    }
    let mut slots = Vec::new();
    let mut entries: Vec<(String, Vec<usize>)> = Vec::new();
    for (n, line) in lines {
        let line_no = n + 1;
        let perr = |msg: String| FeatError::Parse { line: line_no, msg };
        if line.trim().is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# slot ") {
            let f: Vec<&str> = rest.split('\t').collect();
            if f.len() != 3 || f[0].parse::<usize>().ok() != Some(slots.len()) {
                return Err(perr("bad slot line".into()));
            }
            slots.push(PlaceManner { place: f[1].into(), manner: f[2].into() });
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 3 {
            return Err(perr("expected label<TAB>class_id<TAB>slot_indices".into()));
        }
        if f[1].parse::<usize>().ok() != Some(entries.len()) {
            return Err(perr(format!("class id {} out of sequence", f[1])));
        }
        let idx = if f[2].is_empty() {
            Vec::new()
        } else {
            f[2].split(',')
                .map(|s| s.parse::<usize>().map_err(|_| perr(format!("bad slot index {s:?}"))))
                .collect::<Result<Vec<_>, _>>()?
        };
        entries.push((f[0].to_string(), idx));
    }
    if slots.len() != PM_DIMS || entries.len() != N_PHONEME_CLASSES {
        return Err(FeatError::Parse {
            line: 0,
            msg: format!("expected {PM_DIMS} slots and {N_PHONEME_CLASSES} classes, got {} and {}", slots.len(), entries.len()),
        });
    }
    if let Some((l, _)) = entries.iter().find(|(_, s)| s.iter().any(|&i| i >= PM_DIMS)) {
        return Err(FeatError::Parse { line: 0, msg: format!("slot index out of range for {l}") });
    }
    Ok(PhonemeInventory { slots, entries })
}

pub fn render_inventory_tsv(inv: &PhonemeInventory) -> String {
    let mut out = format!("{INVENTORY_HEADER}\n");
    for (i, s) in inv.slots.iter().enumerate() {
        out.push_str(&format!("# slot {i}\t{}\t{}\n", s.place, s.manner));
    }
    for (i, (label, slots)) in inv.entries.iter().enumerate() {
        let idx: Vec<String> = slots.iter().map(|s| s.to_string()).collect();
        out.push_str(&format!("{label}\t{i}\t{}\n", idx.join(",")));
    }
    out
}

pub fn phoneme_class_id(label: &str) -> Result<usize, FeatError> {
    PhonemeInventory::builtin().class_id(label).ok_or_else(|| FeatError::UnknownPhoneme(label.to_string()))
}

pub fn phoneme_label(class_id: usize) -> Result<&'static str, FeatError> {
    PhonemeInventory::builtin()
        .entries
        .get(class_id)
        .map(|(l, _)| l.as_str())
        .ok_or_else(|| FeatError::UnknownPhoneme(format!("#{class_id}")))
}

pub fn encode_phoneme_pm(label: &str) -> Result<[f64; PM_DIMS], FeatError> {
    let inv = PhonemeInventory::builtin();
    let id = inv.class_id(label).ok_or_else(|| FeatError::UnknownPhoneme(label.to_string()))?;
    Ok(inv.pm_vector(id))
}

/// Stacks the place/manner vectors of a class-id sequence into a `T × 18` matrix.
pub fn encode_phoneme_pm_seq(class_ids: &[usize]) -> Matrix {
    let inv = PhonemeInventory::builtin();
    let mut m = Matrix::zeros(class_ids.len(), PM_DIMS);
    for (i, &c) in class_ids.iter().enumerate() {
        m.row_mut(i).copy_from_slice(&inv.pm_vector(c));
    }
    m
}
