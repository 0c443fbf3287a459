use std::collections::HashMap;

use super::{LogLikSamples, SampleError};

/// Partition of observations into named groups.
///
/// Groups are ordered by first appearance in the assignment listing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupMap {
    assignment: Vec<(String, String)>,
    groups: Vec<String>,
}

impl GroupMap {
    /// Builds from `(obs_id, group)` pairs in listing order.
    pub fn from_pairs<I, A, B>(pairs: I) -> Result<Self, SampleError>
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut seen = HashMap::new();
        let mut assignment = Vec::new();
        let mut groups: Vec<String> = Vec::new();
        for (obs, group) in pairs {
            let (obs, group) = (obs.into(), group.into());
            if seen.insert(obs.clone(), ()).is_some() {
                return Err(SampleError::DuplicateObsId(obs));
            }
            if !groups.contains(&group) {
                groups.push(group.clone());
            }
            assignment.push((obs, group));
        }
        if assignment.is_empty() {
            return Err(SampleError::EmptyGroupMap);
        }
        Ok(Self { assignment, groups })
    }

    /// Every observation in one group called `label`.
    pub fn all_in_one(obs_ids: &[String], label: &str) -> Result<Self, SampleError> {
        Self::from_pairs(obs_ids.iter().map(|id| (id.clone(), label.to_string())))
    }

    /// Each observation in a group of its own, labelled by its id.
    pub fn identity(obs_ids: &[String]) -> Result<Self, SampleError> {
        Self::from_pairs(obs_ids.iter().map(|id| (id.clone(), id.clone())))
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn assignment(&self) -> &[(String, String)] {
        &self.assignment
    }

    pub fn group_of(&self, obs_id: &str) -> Option<&str> {
        self.assignment
            .iter()
            .find(|(o, _)| o == obs_id)
            .map(|(_, g)| g.as_str())
    }

    /// Column indices of each group's members, in the column order of `obs_ids`.
    pub fn members(&self, obs_ids: &[String]) -> Result<Vec<Vec<usize>>, SampleError> {
        let index: HashMap<&str, usize> = obs_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let group_index: HashMap<&str, usize> = self
            .groups
            .iter()
            .enumerate()
            .map(|(g, label)| (label.as_str(), g))
            .collect();
        let mut col_group = vec![None; obs_ids.len()];
        for (obs, group) in &self.assignment {
            let i = *index
                .get(obs.as_str())
                .ok_or_else(|| SampleError::UnknownObsId(obs.clone()))?;
            col_group[i] = Some(group_index[group.as_str()]);
        }
        let mut members = vec![Vec::new(); self.groups.len()];
        for (i, g) in col_group.into_iter().enumerate() {
            let g = g.ok_or_else(|| SampleError::UncoveredObsId(obs_ids[i].clone()))?;
            members[g].push(i);
        }
        Ok(members)
    }
}

/// Sums member columns per group. Group labels become the new observation ids.
pub fn aggregate(samples: &LogLikSamples, groups: &GroupMap) -> Result<LogLikSamples, SampleError> {
    let members = groups.members(samples.obs_ids())?;
    let columns = members
        .iter()
        .map(|cols| {
            let mut acc = vec![0.0; samples.n_draws()];
            for &i in cols {
                for (a, v) in acc.iter_mut().zip(samples.column(i)) {
                    *a += v;
                }
            }
            acc
        })
        .collect();
    LogLikSamples::from_columns(
        columns,
        samples.draw_chain().to_vec(),
        groups.groups().to_vec(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn aggregate_two_observations_into_one_group() {
        let s = LogLikSamples::from_rows(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![0, 0],
            ids(&["a", "b"]),
        )
        .unwrap();
        let g = GroupMap::from_pairs([("a", "g"), ("b", "g")]).unwrap();
        let agg = aggregate(&s, &g).unwrap();
        assert_eq!(agg.column(0), &[3.0, 7.0]);
        assert_eq!(agg.obs_ids(), &["g".to_string()]);
    }

    #[test]
    fn aggregate_three_observations_into_two_groups() {
        let s = LogLikSamples::from_rows(
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            vec![0, 0],
            ids(&["a", "b", "c"]),
        )
        .unwrap();
        let g = GroupMap::from_pairs([("a", "g1"), ("b", "g1"), ("c", "g2")]).unwrap();
        let agg = aggregate(&s, &g).unwrap();
        assert_eq!(agg.row(0), vec![3.0, 3.0]);
        assert_eq!(agg.row(1), vec![9.0, 6.0]);
    }

    #[test]
    fn identity_map_only_relabels() {
        let s = LogLikSamples::from_rows(
            vec![vec![1.5, -2.0], vec![0.25, 4.0]],
            vec![3, 3],
            ids(&["x", "y"]),
        )
        .unwrap();
        let agg = aggregate(&s, &GroupMap::identity(s.obs_ids()).unwrap()).unwrap();
        assert_eq!(agg, s);
    }

    #[test]
    fn coverage_errors() {
        let s = LogLikSamples::from_rows(
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
            vec![0, 0],
            ids(&["a", "b"]),
        )
        .unwrap();
        let g = GroupMap::from_pairs([("a", "g"), ("z", "g")]).unwrap();
        assert!(matches!(aggregate(&s, &g), Err(SampleError::UnknownObsId(ref o)) if o == "z"));
        let g = GroupMap::from_pairs([("a", "g")]).unwrap();
        assert!(matches!(aggregate(&s, &g), Err(SampleError::UncoveredObsId(ref o)) if o == "b"));
        assert!(matches!(
            GroupMap::from_pairs([("a", "g"), ("a", "h")]),
            Err(SampleError::DuplicateObsId(_))
        ));
    }

    #[test]
    fn group_order_is_first_appearance() {
        let g = GroupMap::from_pairs([("a", "z"), ("b", "y"), ("c", "z")]).unwrap();
        assert_eq!(g.groups(), &["z".to_string(), "y".to_string()]);
        assert_eq!(g.group_of("c"), Some("z"));
    }
}
