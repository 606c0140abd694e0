"""Markdown rendering of run reports, laid out like the published tables."""

from __future__ import annotations

STAGE_ORDER = ("load", "identify", "estimate", "refute", "interpret")


def _f(value, digits=2) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def dataset_table(ds: dict) -> list[str]:
    lines = [f"## Dataset `{ds.get('dataset_id', '')}` ({ds['n']} events)", "",
             "| Object (O) | OV (m^3) | Count |", "|---|---|---|"]
    for name, row in ds["objects"].items():
        lines.append(f"| {name} | {row['volume_m3']:.3g} | {row['count']} |")
    lines += ["", "| Surface (S) | SC | SS | Count |", "|---|---|---|---|"]
    for name, row in ds["surfaces"].items():
        sc = "T" if row["in_container"] else "F"
        ss = "T" if row["sliding"] else "F"
        lines.append(f"| {name} | {sc} | {ss} | {row['count']} |")
    dist = ds["distance"]
    lines += [
        "",
        "| Hand-selection (H) | Count |", "|---|---|",
        f"| Left | {ds['hand']['Left']} |", f"| Right | {ds['hand']['Right']} |",
        "",
        "| Hand-distance (D) | Range (m) | Count |", "|---|---|---|",
        f"| Close | ({dist['close']['range_m'][0]:.2f}, {dist['close']['range_m'][1]:.2f}) | {dist['close']['count']} |",
        f"| Far | ({dist['far']['range_m'][0]:.2f}, {dist['far']['range_m'][1]:.2f}) | {dist['far']['count']} |",
        "",
    ]
    return lines


def render_markdown(doc: dict) -> str:
    lines = ["# graspcause run report", ""]
    if "dataset" in doc:
        lines += dataset_table(doc["dataset"])
    if "estimand" in doc:
        est = doc["estimand"]
        lines += ["## Estimand", "", f"`{est['expression']}`", "",
                  f"Identifiable without caveats: {'yes' if est['identifiable'] else 'no'}", ""]
        lines += [f"- {w}" for w in est["warnings"]]
        lines.append("")
    if doc.get("estimates"):
        n = doc["estimates"][0]["n"]
        level = round(100 * (1 - doc["estimates"][0]["alpha"]))
        lines += ["## Effects", "", f"| Samples | Estimator | Effect | Conf. Intv. ({level}%) |", "|---|---|---|---|"]
        for i, e in enumerate(doc["estimates"]):
            lines.append(f"| {n if i == 0 else ''} | {e['estimator']} | {_f(e['effect'])} | "
                         f"[{_f(e['ci_low'])}, {_f(e['ci_high'])}] |")
        lines.append("")
    if doc.get("refutations"):
        order = ["PlaceboTreatmentOutcome", "RandomCommonCause", "DataSubset"]
        rows: dict = {}
        for r in doc["refutations"]:
            rows.setdefault(r["estimator"], {"effect": r["original_effect"]})[r["strategy"]] = r
        present = [s for s in order if any(s in v for v in rows.values())]
        header = " | ".join(f"Check-{order.index(s) + 1} (Δ)" for s in present)
        lines += ["## Refutations", "", f"| Estimator | Effect | {header} |", "|---|---|" + "---|" * len(present)]
        for name, v in rows.items():
            cells = []
            for s in present:
                r = v.get(s)
                if r is None:
                    cells.append("")
                elif "error" in r:
                    cells.append("error")
                else:
                    cells.append(f"{_f(r['recomputed_effect'])} ({_f(r['delta_abs'])})")
            lines.append(f"| {name} | {_f(v['effect'])} | " + " | ".join(cells) + " |")
        lines += ["", "Check-1 permutes treatment and outcome, check-2 adds a random common cause, "
                  "check-3 re-estimates on random subsets.", ""]
    if doc.get("interpretation"):
        it = doc["interpretation"]
        lines += [f"## CATE tree ({it['estimator']}, depth <= {it['max_depth']})", "",
                  "| Leaf | n | Mean CATE | Colour |", "|---|---|---|---|"]
        for leaf in it["leaves"]:
            lines.append(f"| {leaf['path']} | {leaf['n']} | {leaf['mean_cate']:+.3f} | {leaf['color']} |")
        lines.append("")
    lines += ["## Stages", ""]
    ordered = sorted(doc["stages"], key=lambda k: STAGE_ORDER.index(k) if k in STAGE_ORDER else len(STAGE_ORDER))
    for name in ordered:
        st = doc["stages"][name]
        reason = f" ({st['reason']})" if st.get("reason") else ""
        lines.append(f"- {name}: {st['status']}{reason}")
    if doc["errors"]:
        lines += ["", "## Errors", ""] + [f"- {e['stage']}: {e['message']}" for e in doc["errors"]]
    return "\n".join(lines) + "\n"
