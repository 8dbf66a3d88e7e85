"""Smoke test for the `genie` extension module.

Build it with `maturin develop -m crates/py/Cargo.toml`, or copy
`target/release/libgenie.so` to `python/genie.so`, then run this file.
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import genie  # noqa: E402


def main():
    assert genie.canonicalize("Restaurant.All( ).count()") == "Restaurant.All().count()"
    try:
        genie.canonicalize("Restaurant.All().matching(field: .deliveryFee, value: < 25)")
    except ValueError:
        pass
    else:
        raise AssertionError("comparison operator should not parse")

    rt = genie.Runtime()
    assert "static func GetRestaurant(" in rt.schema()

    s = rt.session()
    assert s.execute("Restaurant.All().count()")["feedback"].endswith("→ 5")

    s.set_screen([
        {"template": "RestaurantCard", "class": "Restaurant", "instance_id": "r1",
         "bbox": {"x": 0, "y": 0, "w": 360, "h": 120}},
        {"template": "RestaurantCard", "class": "Restaurant", "instance_id": "r2",
         "bbox": {"x": 0, "y": 130, "w": 360, "h": 120}},
    ])
    before = s.revision
    result = s.command("Reorder my last meal from this restaurant", taps=[(40.0, 60.0)])
    assert result["error"] is None, result
    assert result["render"]["template"] == "OrderView"
    order = s.state("Order", result["render"]["instance_id"])
    assert order["restaurant"] == {"$ref": {"class": "Restaurant", "id": "r1"}}
    assert len(order["items"]) == 3
    assert s.revision > before

    failed = s.command("When does Chipotle open?")
    assert failed["error"]["code"] == "UnsupportedFeature"
    assert failed["error"]["member"] == "openingTime"

    report = rt.evaluate()
    assert report["exact_rate"] == 1.0, report["failures"]
    print("ok:", report["total"], "records,", s.history_len(), "commands")


if __name__ == "__main__":
    main()
