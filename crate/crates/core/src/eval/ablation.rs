use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::prompts::PromptVariant;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell<T> {
    pub need_sim: T,
    pub sol_sim: T,
}

/// Drops relative to the full variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deltas<T> {
    pub atom_removal: T,
    pub constraint_removal: T,
    pub both_removal: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable<T> {
    /// `need[constraints][atom]`, false before true.
    pub need: [[T; 2]; 2],
    pub solution: [[T; 2]; 2],
    pub need_deltas: Deltas<T>,
    pub solution_deltas: Deltas<T>,
}

fn deltas<T: Scalar>(grid: &[[T; 2]; 2]) -> Deltas<T> {
    let full = grid[1][1].clone();
    Deltas {
        atom_removal: full.clone() - grid[1][0].clone(),
        constraint_removal: full.clone() - grid[0][1].clone(),
        both_removal: full - grid[0][0].clone(),
    }
}

pub fn ablation_report<T: Scalar>(
    results: &BTreeMap<PromptVariant, AblationCell<T>>,
) -> Result<AblationTable<T>, EvalError> {
    let cell = |atom: bool, constraints: bool| {
        let v = PromptVariant::from_grid(atom, constraints);
        results.get(&v).ok_or(EvalError::MissingCell(v))
    };
    let grid = |pick: &dyn Fn(&AblationCell<T>) -> T| -> Result<[[T; 2]; 2], EvalError> {
        Ok([
            [pick(cell(false, false)?), pick(cell(true, false)?)],
            [pick(cell(false, true)?), pick(cell(true, true)?)],
        ])
    };
    let need = grid(&|c| c.need_sim.clone())?;
    let solution = grid(&|c| c.sol_sim.clone())?;
    Ok(AblationTable {
        need_deltas: deltas(&need),
        solution_deltas: deltas(&solution),
        need,
        solution,
    })
}

/// Builds the variant map from `[none, atom only, constraints only, full]` cells.
pub fn grid_results<T: Clone>(need: [T; 4], solution: [T; 4]) -> BTreeMap<PromptVariant, AblationCell<T>> {
    let order = [(false, false), (true, false), (false, true), (true, true)];
    order
        .iter()
        .enumerate()
        .map(|(i, &(a, c))| {
            (
                PromptVariant::from_grid(a, c),
                AblationCell {
                    need_sim: need[i].clone(),
                    sol_sim: solution[i].clone(),
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{decimal, Exact};

    #[test]
    fn identical_cells_have_zero_deltas() {
        let r = grid_results([Exact::new(1, 2); 4], [Exact::new(1, 3); 4]);
        let t = ablation_report(&r).unwrap();
        assert_eq!(t.need_deltas.atom_removal, Exact::new(0, 1));
        assert_eq!(t.solution_deltas.both_removal, Exact::new(0, 1));
    }

    #[test]
    fn missing_cell() {
        let mut r = grid_results([decimal(1, 0); 4], [decimal(1, 0); 4]);
        r.remove(&PromptVariant::NoAtomConstraints);
        assert_eq!(
            ablation_report(&r),
            Err(EvalError::MissingCell(PromptVariant::NoAtomConstraints))
        );
    }
}
