use std::collections::HashMap;

use super::edges::{Constraint, ConstraintKind, NodeId};
use super::pose::Pose2;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nodes, initial values and constraints of one pose-graph optimisation.
#[derive(Clone, Debug)]
pub struct PoseGraphProblem<T> {
    nodes: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    initial: Vec<Pose2<T>>,
    constraints: Vec<Constraint<T>>,
    /// dense endpoint indices per constraint
    endpoints: Vec<(usize, Option<usize>)>,
    fixed: Vec<bool>,
}

impl<T: Real> PoseGraphProblem<T> {
    /// Builds a gauge-fixed problem: at least one prior or one fixed node is required.
    pub fn new(nodes: Vec<(NodeId, Pose2<T>)>, constraints: Vec<Constraint<T>>, fixed: &[NodeId]) -> Result<Self> {
        let problem = Self::without_gauge(nodes, constraints, fixed)?;
        if !problem.is_gauge_fixed() {
            return Err(Error::Data(
                "pose graph has no prior and no fixed node (gauge is free)".into(),
            ));
        }
        Ok(problem)
    }

    /// Builds a problem without requiring a gauge; it can be scored but not optimised.
    pub fn without_gauge(
        nodes: Vec<(NodeId, Pose2<T>)>,
        constraints: Vec<Constraint<T>>,
        fixed: &[NodeId],
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        let mut ids = Vec::with_capacity(nodes.len());
        let mut initial = Vec::with_capacity(nodes.len());
        for (k, (id, pose)) in nodes.into_iter().enumerate() {
            if index.insert(id, k).is_some() {
                return Err(Error::Data(format!("duplicate node {id:?}")));
            }
            ids.push(id);
            initial.push(pose);
        }
        let lookup = |id: NodeId| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Data(format!("constraint references unknown node {id:?}")))
        };
        let mut endpoints = Vec::with_capacity(constraints.len());
        for c in &constraints {
            c.validate()?;
            let (i, j) = c.nodes();
            endpoints.push((lookup(i)?, j.map(lookup).transpose()?));
        }
        let mut fixed_flags = vec![false; ids.len()];
        for id in fixed {
            fixed_flags[lookup(*id)?] = true;
        }
        Ok(Self {
            nodes: ids,
            index,
            initial,
            constraints,
            endpoints,
            fixed: fixed_flags,
        })
    }

    pub fn is_gauge_fixed(&self) -> bool {
        self.fixed.iter().any(|&f| f) || self.constraints.iter().any(|c| c.kind() == ConstraintKind::PosePrior)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn initial(&self) -> &[Pose2<T>] {
        &self.initial
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn endpoints(&self) -> &[(usize, Option<usize>)] {
        &self.endpoints
    }

    pub fn is_fixed(&self, k: usize) -> bool {
        self.fixed[k]
    }

    pub fn fixed_nodes(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .zip(&self.fixed)
            .filter(|(_, &f)| f)
            .map(|(id, _)| *id)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Number of constraints of each kind: (relative pose, distance, prior).
    pub fn counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for c in &self.constraints {
            match c.kind() {
                ConstraintKind::RelativePose => counts.0 += 1,
                ConstraintKind::Distance => counts.1 += 1,
                ConstraintKind::PosePrior => counts.2 += 1,
            }
        }
        counts
    }

    /// Replaces the initial values, e.g. with an optimised estimate.
    pub fn with_initial(mut self, poses: Vec<Pose2<T>>) -> Result<Self> {
        if poses.len() != self.nodes.len() {
            return Err(Error::Data(format!(
                "expected {} poses, got {}",
                self.nodes.len(),
                poses.len()
            )));
        }
        self.initial = poses;
        Ok(self)
    }
}

/// Sum over constraints of `e^T Ω e` at `poses` (indexed like the problem's nodes).
pub fn total_chi2<T: Real>(problem: &PoseGraphProblem<T>, poses: &[Pose2<T>]) -> T {
    problem
        .constraints
        .iter()
        .zip(&problem.endpoints)
        .map(|(c, &(a, b))| c.chi2(&poses[a], b.map(|b| &poses[b])))
        .fold(T::zero(), |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose_graph::mat3;

    fn n(t: usize) -> NodeId {
        NodeId::new(0, t)
    }

    #[test]
    fn construction_checks() {
        let nodes = vec![(n(0), Pose2::<f64>::identity()), (n(1), Pose2::identity())];
        let dist = Constraint::Distance {
            i: n(0),
            j: n(1),
            d: 1.0,
            w: 1.0,
        };
        assert!(PoseGraphProblem::new(nodes.clone(), vec![dist.clone()], &[]).is_err());
        assert!(PoseGraphProblem::new(nodes.clone(), vec![dist.clone()], &[n(0)]).is_ok());
        let bad = Constraint::Distance {
            i: n(0),
            j: n(7),
            d: 1.0,
            w: 1.0,
        };
        assert!(PoseGraphProblem::new(nodes.clone(), vec![bad], &[n(0)]).is_err());
        let dup = vec![(n(0), Pose2::identity()), (n(0), Pose2::identity())];
        assert!(PoseGraphProblem::<f64>::new(dup, vec![], &[]).is_err());
    }

    #[test]
    fn chi2_examples() {
        let nodes = vec![(n(0), Pose2::<f64>::identity()), (n(1), Pose2::new(1.0, 0.0, 0.0))];
        let prior = Constraint::PosePrior {
            i: n(0),
            z: Pose2::identity(),
            info: mat3::identity(),
        };
        let dist = Constraint::Distance {
            i: n(0),
            j: n(1),
            d: 3.0,
            w: 0.25,
        };
        let p = PoseGraphProblem::new(nodes, vec![prior, dist], &[]).unwrap();
        assert_eq!(total_chi2(&p, p.initial()), 1.0);
        assert_eq!(p.counts(), (0, 1, 1));
    }
}
