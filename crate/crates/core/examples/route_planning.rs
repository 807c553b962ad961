//! Shortest paths on the built-in junction network, before and after the
//! mainline link is blocked.
//!
//! ```text
//! cargo run --example route_planning
//! ```

use cvroute::network::{Overrides, TravelTimeOverride};
use cvroute::scenario::builtin_network;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let net = builtin_network("junction").expect("built-in");
    let sp = net.shortest_path("S", "E")?.expect("connected");
    let ids: Vec<_> = sp.route.edge_ids(&net).collect();
    println!("free flow: {} in {:.1} s", ids.join(" -> "), sp.cost);

    let mut view = Overrides::new();
    view.insert(net.require_edge("J2_J3")?, TravelTimeOverride::Blocked)?;
    let from = net.require_node("S")?;
    let to = net.require_node("E")?;
    let detour = net.shortest_path_with(&view, from, to).expect("bypass exists");
    let ids: Vec<_> = detour.route.edge_ids(&net).collect();
    println!("J2_J3 blocked: {} in {:.1} s", ids.join(" -> "), detour.cost);

    // a slow but open link loses to the bypass once it costs more
    let mut slow = Overrides::new();
    slow.insert(net.require_edge("J2_J3")?, TravelTimeOverride::Seconds(60.0))?;
    let sp = net.shortest_path_with(&slow, from, to).expect("connected");
    let ids: Vec<_> = sp.route.edge_ids(&net).collect();
    println!("J2_J3 at 60 s: {} in {:.1} s", ids.join(" -> "), sp.cost);
    Ok(())
}
