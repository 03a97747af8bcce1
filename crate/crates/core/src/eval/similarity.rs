use serde::{Deserialize, Serialize};

use super::kmeans::{Cluster, ClusterModel};
use super::EvalError;
use crate::scalar::{Real, Scalar};

/// Cosine similarity on the vectors as stored; zero vectors score 0.
pub fn cos_sim<T: Real>(a: &[T], b: &[T]) -> T {
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == T::zero() || nb == T::zero() {
        return T::zero();
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Nearest centroid by cosine; the lower id wins ties.
pub fn assign_cluster<T: Real>(robot: &[T], model: &ClusterModel<T>) -> usize {
    let mut best = (0, T::neg_infinity());
    for c in &model.clusters {
        let s = cos_sim(robot, &c.centroid);
        if s > best.1 {
            best = (c.id, s);
        }
    }
    best.0
}

/// Largest cluster; the lower id wins ties.
pub fn modal_cluster<T>(model: &ClusterModel<T>) -> usize {
    let mut best = (0, 0);
    for c in &model.clusters {
        if c.size() > best.1 {
            best = (c.id, c.size());
        }
    }
    best.0
}

/// Mean cosine similarity between the robot vector and every unit in `cluster`.
pub fn avg_sim<T: Real>(robot: &[T], cluster: &Cluster<T>, units: &[Vec<T>]) -> Result<T, EvalError> {
    if cluster.members.is_empty() {
        return Err(EvalError::EmptyCluster(cluster.id));
    }
    let mut total = T::zero();
    for &i in &cluster.members {
        let unit = units.get(i).ok_or(EvalError::MemberOutOfRange(i))?;
        total += cos_sim(robot, unit);
    }
    Ok(total / T::from_count(cluster.members.len()))
}

/// Share of all `n` units that fall in a cluster of `size`.
pub fn proportion_rate<T: Scalar>(size: usize, n: usize) -> Result<T, EvalError> {
    if size == 0 || size > n {
        return Err(EvalError::Proportion { size, n });
    }
    Ok(T::from_count(size) / T::from_count(n))
}

/// Which cluster the robot response is scored against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// The cluster nearest to the robot response.
    #[default]
    Assigned,
    /// The most populated cluster, i.e. the need most people named.
    Modal,
}

impl std::str::FromStr for SimilarityMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "assigned" => Ok(Self::Assigned),
            "modal" => Ok(Self::Modal),
            other => Err(format!("unknown similarity mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterScore<T> {
    pub model: ClusterModel<T>,
    pub assigned_cluster: usize,
    pub avg_sim: T,
    pub proportion: T,
}

pub fn score<T: Real>(
    robot: &[T],
    model: ClusterModel<T>,
    units: &[Vec<T>],
    mode: SimilarityMode,
) -> Result<ClusterScore<T>, EvalError> {
    let id = match mode {
        SimilarityMode::Assigned => assign_cluster(robot, &model),
        SimilarityMode::Modal => modal_cluster(&model),
    };
    let cluster = &model.clusters[id];
    let avg_sim = avg_sim(robot, cluster, units)?;
    let proportion = proportion_rate(cluster.size(), units.len())?;
    Ok(ClusterScore {
        model,
        assigned_cluster: id,
        avg_sim,
        proportion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Exact;

    fn model(centroids: Vec<Vec<f64>>, sizes: &[usize]) -> ClusterModel<f64> {
        let mut next = 0;
        let clusters = centroids
            .into_iter()
            .zip(sizes)
            .enumerate()
            .map(|(id, (centroid, &s))| {
                let members = (next..next + s).collect();
                next += s;
                Cluster { id, members, centroid }
            })
            .collect();
        ClusterModel {
            clusters,
            assignments: vec![],
            sse_history: vec![],
            iterations: 0,
        }
    }

    #[test]
    fn assignment_rules() {
        let m = model(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]], &[1, 1, 1]);
        assert_eq!(assign_cluster(&[1.0, 0.0], &m), 0);
        assert_eq!(assign_cluster(&[0.0, 2.0], &m), 1);
        let m = model(vec![vec![1.0, 0.0], vec![0.0, 1.0]], &[1, 1]);
        assert_eq!(assign_cluster(&[1.0, 1.0], &m), 0);
        let m = model(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], &[1, 1]);
        assert_eq!(assign_cluster(&[0.0, 0.0, 1.0], &m), 0);
    }

    #[test]
    fn avg_sim_oracles() {
        let units = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0]];
        let c = Cluster { id: 0, members: vec![0, 1], centroid: vec![0.5, 0.5] };
        assert!((avg_sim::<f64>(&[1.0, 0.0], &c, &units).unwrap() - 0.5).abs() < 1e-15);
        let dup = Cluster { id: 0, members: vec![0, 2], centroid: vec![1.0, 0.0] };
        assert!((avg_sim::<f64>(&[1.0, 0.0], &dup, &units).unwrap() - 1.0).abs() < 1e-15);
        let orth = Cluster { id: 0, members: vec![1], centroid: vec![0.0, 1.0] };
        assert_eq!(avg_sim(&[1.0, 0.0], &orth, &units).unwrap(), 0.0);
        let empty = Cluster { id: 3, members: vec![], centroid: vec![0.0, 1.0] };
        assert_eq!(avg_sim(&[1.0, 0.0], &empty, &units), Err(EvalError::EmptyCluster(3)));
    }

    #[test]
    fn proportions_are_exact() {
        assert_eq!(proportion_rate::<Exact>(4, 10).unwrap(), Exact::new(2, 5));
        assert_eq!(proportion_rate::<f64>(7, 7).unwrap(), 1.0);
        assert!(proportion_rate::<f64>(0, 7).is_err());
        assert!(proportion_rate::<f64>(8, 7).is_err());
    }

    #[test]
    fn modal_prefers_lower_id_on_ties() {
        let m = model(vec![vec![1.0], vec![1.0], vec![1.0]], &[2, 3, 3]);
        assert_eq!(modal_cluster(&m), 1);
    }
}
