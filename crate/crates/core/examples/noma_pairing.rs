//! One allocation round at a cluster head: reservation-aware pairing on a
//! 4/1 split, info-packet negotiation, pair transmission with SIC, then
//! aggregation of the decoded packets.
//!
//! `cargo run --example noma_pairing`

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tsn_iot_sim::channel::LinkBudget;
use tsn_iot_sim::domain::{NodeId, Packet, PacketId, Priority, ScenarioConfig, Split, SubBandPlan, Tier};
use tsn_iot_sim::noma_mac::{aggregate_at_ch, allocate_subbands, info_packet_phase, transmit_pair, MacParams, TxIntent};

fn main() {
    let cfg = ScenarioConfig {
        base_snr_db: 20.0,
        ..Default::default()
    };
    let plan = SubBandPlan::from_split(Tier::Ch, Split::new(4, 1));
    let link = LinkBudget::into_tier(Tier::Ch, &cfg).expect("valid link");
    let params = MacParams::from_config(&cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // Twelve SNs with one packet each; every third one is urgent.
    let packets: Vec<Packet> = (0..12u32)
        .map(|i| {
            let p = if i % 3 == 0 { Priority::Urgent } else { Priority::Normal };
            Packet::new(PacketId(u64::from(i)), p, cfg.header_bits(), cfg.payload_bits(), 0.0, NodeId(100 + i))
        })
        .collect();
    let ready: Vec<TxIntent> = packets
        .iter()
        .enumerate()
        .map(|(slot, p)| TxIntent::new(p.source_sn_id, Some(slot), p.priority, f64::from(slot as u32) * 1e-6, slot as u64))
        .collect();

    let alloc = allocate_subbands(ready, &plan);
    println!("{} pairs placed, {} intents deferred", alloc.pairs.len(), alloc.deferred.len());

    let mut decoded = [Vec::new(), Vec::new()];
    for pair in &alloc.pairs {
        let info = info_packet_phase(pair, &link, &params, &mut rng);
        let start = info.duration_s + params.proc_delay_s;
        let weak_bits = pair.weak.map(|_| packets[0].total_bits());
        let out = transmit_pair(start, packets[0].total_bits(), weak_bits, &link, &params, &mut rng);
        let describe = |i: &TxIntent| format!("sn{} {}", i.node_id.0, i.priority.as_str());
        println!(
            "band {}: PL1 {} -> {} at {:.1} us{}",
            pair.subband_id.0,
            describe(&pair.strong),
            if out.strong.decoded { "ok" } else { "lost" },
            out.strong.completed_at_s * 1e6,
            match (pair.weak, out.weak) {
                (Some(w), Some(r)) => format!(
                    "; PL2 {} -> {} at {:.1} us",
                    describe(&w),
                    if r.decoded { "ok" } else { "lost" },
                    r.completed_at_s * 1e6
                ),
                _ => String::new(),
            }
        );
        let mut keep = |i: &TxIntent, ok: bool| {
            if ok {
                let p = &packets[i.packet.expect("intent carries a packet")];
                decoded[p.priority.index()].push(p.clone());
            }
        };
        keep(&pair.strong, out.strong.decoded);
        if let (Some(w), Some(r)) = (pair.weak, out.weak) {
            keep(&w, r.decoded);
        }
    }

    for (class, group) in decoded.into_iter().enumerate() {
        let n = group.len();
        if n == 0 {
            continue;
        }
        let agg = aggregate_at_ch(PacketId(1000 + class as u64), group, cfg.agg_factor).expect("same class");
        println!(
            "aggregate {}: {n} packets -> {} bits (header {}, payload {})",
            agg.priority.as_str(),
            agg.total_bits(),
            agg.header_bits,
            agg.payload_bits
        );
    }
}
