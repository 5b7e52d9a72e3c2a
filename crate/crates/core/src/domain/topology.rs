//! Four-tier node inventory: SN -> CH -> AP -> CBS.

use std::fmt::{self, Write as _};

use super::config::{ConfigError, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Sn,
    Ch,
    Ap,
    Cbs,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Sn => "SN",
            Tier::Ch => "CH",
            Tier::Ap => "AP",
            Tier::Cbs => "CBS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeInfo {
    pub id: NodeId,
    pub tier: Tier,
    /// Initial sync state; only the grandmaster starts synced.
    pub synced: bool,
    pub clock_offset_s: f64,
}

/// Immutable after construction; share freely across replications.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<NodeInfo>,
    parent_of: Vec<Option<NodeId>>,
    children_of: Vec<Vec<NodeId>>,
    peers_of: Vec<Vec<NodeId>>,
    forward_peer: Vec<Option<NodeId>>,
    hop_distance_m: Vec<f64>,
    aps: Vec<NodeId>,
    chs: Vec<NodeId>,
    sns: Vec<NodeId>,
}

pub const CBS: NodeId = NodeId(0);

impl Topology {
    pub fn nodes(&self) -> &[NodeInfo] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &NodeInfo {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn tier(&self, id: NodeId) -> Tier {
        self.nodes[id.index()].tier
    }

    pub fn cbs(&self) -> NodeId {
        CBS
    }

    pub fn parent_of(&self, id: NodeId) -> Option<NodeId> {
        self.parent_of[id.index()]
    }

    pub fn children_of(&self, id: NodeId) -> &[NodeId] {
        &self.children_of[id.index()]
    }

    /// Same-tier neighbours: full mesh under the same parent plus the
    /// cross-parent links.
    pub fn peers_of(&self, id: NodeId) -> &[NodeId] {
        &self.peers_of[id.index()]
    }

    /// Designated limited-forwarding peer.
    pub fn forward_peer(&self, id: NodeId) -> Option<NodeId> {
        self.forward_peer[id.index()]
    }

    /// Length of the node's upstream hop; zero for the CBS.
    pub fn hop_distance_m(&self, id: NodeId) -> f64 {
        self.hop_distance_m[id.index()]
    }

    pub fn aps(&self) -> &[NodeId] {
        &self.aps
    }

    pub fn chs(&self) -> &[NodeId] {
        &self.chs
    }

    pub fn sns(&self) -> &[NodeId] {
        &self.sns
    }

    pub fn tier_nodes(&self, tier: Tier) -> &[NodeId] {
        match tier {
            Tier::Sn => &self.sns,
            Tier::Ch => &self.chs,
            Tier::Ap => &self.aps,
            Tier::Cbs => std::slice::from_ref(&CBS),
        }
    }

    /// Canonical text form; identical configs give identical bytes.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for n in &self.nodes {
            let parent = self
                .parent_of(n.id)
                .map_or_else(|| "-".to_string(), |p| p.to_string());
            let fwd = self
                .forward_peer(n.id)
                .map_or_else(|| "-".to_string(), |p| p.to_string());
            let peers: Vec<String> = self.peers_of(n.id).iter().map(ToString::to_string).collect();
            let _ = writeln!(
                out,
                "{} {} parent={} hop_m={} fwd={} peers=[{}]",
                n.id,
                n.tier.as_str(),
                parent,
                self.hop_distance_m(n.id),
                fwd,
                peers.join(",")
            );
        }
        out
    }
}

/// Upstream link availability of every node for one sync cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkState {
    down: Vec<bool>,
}

impl LinkState {
    pub fn all_up(node_count: usize) -> Self {
        Self {
            down: vec![false; node_count],
        }
    }

    pub fn is_down(&self, id: NodeId) -> bool {
        self.down.get(id.index()).copied().unwrap_or(false)
    }

    pub fn set_down(&mut self, id: NodeId, down: bool) {
        self.down[id.index()] = down;
    }

    pub fn down_count(&self) -> usize {
        self.down.iter().filter(|&&d| d).count()
    }
}

/// Builds the tiered topology. SNs are dealt round-robin by id onto CHs, and
/// CHs round-robin onto APs.
pub fn build_topology(cfg: &ScenarioConfig) -> Result<Topology, ConfigError> {
    cfg.validate()?;

    let ap_n = cfg.ap_count as usize;
    let ch_n = cfg.ch_count as usize;
    let sn_n = cfg.sn_count as usize;
    let total = 1 + ap_n + ch_n + sn_n;

    let mut nodes = Vec::with_capacity(total);
    let mut parent_of = vec![None; total];
    let mut hop = vec![0.0; total];
    nodes.push(NodeInfo {
        id: CBS,
        tier: Tier::Cbs,
        synced: true,
        clock_offset_s: 0.0,
    });

    let mut next = 1u32;
    let mut alloc = |count: usize, tier: Tier, nodes: &mut Vec<NodeInfo>| -> Vec<NodeId> {
        (0..count)
            .map(|_| {
                let id = NodeId(next);
                next += 1;
                nodes.push(NodeInfo {
                    id,
                    tier,
                    synced: false,
                    clock_offset_s: 0.0,
                });
                id
            })
            .collect()
    };
    let aps = alloc(ap_n, Tier::Ap, &mut nodes);
    let chs = alloc(ch_n, Tier::Ch, &mut nodes);
    let sns = alloc(sn_n, Tier::Sn, &mut nodes);

    for &ap in &aps {
        parent_of[ap.index()] = Some(CBS);
        hop[ap.index()] = cfg.dist_ap_cbs_m;
    }
    for (k, &ch) in chs.iter().enumerate() {
        parent_of[ch.index()] = Some(aps[k % ap_n]);
        hop[ch.index()] = cfg.dist_ch_ap_m;
    }
    for (k, &sn) in sns.iter().enumerate() {
        parent_of[sn.index()] = Some(chs[k % ch_n]);
        hop[sn.index()] = cfg.dist_sn_ch_m;
    }

    let mut children_of = vec![Vec::new(); total];
    for id in 1..total {
        if let Some(p) = parent_of[id] {
            children_of[p.index()].push(NodeId(id as u32));
        }
    }

    let mut peers_of = vec![Vec::new(); total];
    let mut forward_peer = vec![None; total];
    for parents in [std::slice::from_ref(&CBS), &aps[..], &chs[..]] {
        let groups: Vec<&Vec<NodeId>> = parents.iter().map(|p| &children_of[p.index()]).collect();
        link_tier(&groups, &mut peers_of, &mut forward_peer);
    }
    for list in &mut peers_of {
        list.sort_unstable();
        list.dedup();
    }

    Ok(Topology {
        nodes,
        parent_of,
        children_of,
        peers_of,
        forward_peer,
        hop_distance_m: hop,
        aps,
        chs,
        sns,
    })
}

/// Full mesh inside each sibling group, plus a link from the k-th member of
/// group g to the k-th member (mod size) of group g+1 (ring over groups).
fn link_tier(
    groups: &[&Vec<NodeId>],
    peers_of: &mut [Vec<NodeId>],
    forward_peer: &mut [Option<NodeId>],
) {
    for group in groups {
        for &a in group.iter() {
            for &b in group.iter() {
                if a != b {
                    peers_of[a.index()].push(b);
                }
            }
        }
    }
    let g = groups.len();
    if g > 1 {
        for (gi, group) in groups.iter().enumerate() {
            let next = groups[(gi + 1) % g];
            if next.is_empty() {
                continue;
            }
            for (k, &a) in group.iter().enumerate() {
                let b = next[k % next.len()];
                peers_of[a.index()].push(b);
                peers_of[b.index()].push(a);
                forward_peer[a.index()] = Some(b);
            }
        }
    } else if let Some(group) = groups.first() {
        if group.len() > 1 {
            for (k, &a) in group.iter().enumerate() {
                forward_peer[a.index()] = Some(group[(k + 1) % group.len()]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sn: u32, ch: u32, ap: u32) -> ScenarioConfig {
        ScenarioConfig {
            sn_count: sn,
            ch_count: ch,
            ap_count: ap,
            ..Default::default()
        }
    }

    #[test]
    fn reference_density_gives_ten_sns_per_ch() {
        let t = build_topology(&cfg(400, 40, 4)).unwrap();
        for &ch in t.chs() {
            assert_eq!(t.children_of(ch).len(), 10);
        }
        for &ap in t.aps() {
            assert_eq!(t.children_of(ap).len(), 10);
        }
    }

    #[test]
    fn max_density_partition() {
        let t = build_topology(&cfg(1600, 40, 4)).unwrap();
        assert!(t.chs().iter().all(|&c| t.children_of(c).len() == 40));
        assert!(t.aps().iter().all(|&a| t.children_of(a).len() == 10));
    }

    #[test]
    fn single_sn_per_ch_only_has_cross_parent_peers() {
        let t = build_topology(&cfg(40, 40, 4)).unwrap();
        for &sn in t.sns() {
            let parent = t.parent_of(sn).unwrap();
            assert!(!t.peers_of(sn).is_empty());
            for &p in t.peers_of(sn) {
                assert_ne!(t.parent_of(p), Some(parent));
                assert_eq!(t.tier(p), Tier::Sn);
            }
        }
    }

    #[test]
    fn uneven_partition_is_rejected() {
        let err = build_topology(&cfg(410, 40, 4)).unwrap_err();
        assert!(err.to_string().contains("sn_count"), "{err}");
    }

    #[test]
    fn structural_invariants() {
        let t = build_topology(&cfg(600, 40, 4)).unwrap();
        assert_eq!(t.nodes().iter().filter(|n| n.tier == Tier::Cbs).count(), 1);
        assert!(t.node(t.cbs()).synced);
        for n in t.nodes() {
            let parent_tier = t.parent_of(n.id).map(|p| t.tier(p));
            let expected = match n.tier {
                Tier::Cbs => None,
                Tier::Ap => Some(Tier::Cbs),
                Tier::Ch => Some(Tier::Ap),
                Tier::Sn => Some(Tier::Ch),
            };
            assert_eq!(parent_tier, expected);
            for &p in t.peers_of(n.id) {
                assert_eq!(t.tier(p), n.tier);
                assert!(t.peers_of(p).contains(&n.id), "asymmetric {} {}", n.id, p);
            }
        }
    }

    #[test]
    fn serialization_is_deterministic() {
        let a = build_topology(&cfg(800, 40, 4)).unwrap().serialize();
        let b = build_topology(&cfg(800, 40, 4)).unwrap().serialize();
        assert_eq!(a, b);
    }
}
