"""Smoke test for the sfverify Python bindings; run after `pip install -e crates/python`."""

import json
import pathlib

import sfverify

CORPUS = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "corpus"


def main():
    chart = sfverify.Chart.load(str(CORPUS / "absolute_value.sfc"))
    assert chart.validate() == [], chart.validate()
    outs = chart.simulate([{"u": -5}, {"u": -5}, {"u": 3}])
    print("simulate:", [o["y"] for o in outs])

    ref = chart.generate()
    assert ref.run([{"u": -5}, {"u": -5}, {"u": 3}]) == outs

    rel = sfverify.Relation.synthesize(chart, ref)
    check = rel.check()
    assert check["total"] and check["functional"] and check["surjective"], check
    print("relation checks:", check["checks"])

    v = sfverify.verify(chart, ref, seed=7, traces=200)
    print("reference:", v.outcome)
    assert v.passed and json.loads(v.to_json())["schema"] == sfverify.SCHEMA

    edited = sfverify.Implementation.load(str(CORPUS / "absolute_value_edited.sfi"))
    assert sfverify.verify(chart, edited, traces=200).outcome == "PASS"
    assert sfverify.verify(chart, edited, traces=200, match_mode="exact").outcome == "FAIL"

    wrong = sfverify.Implementation.load(str(CORPUS / "absolute_value_wrong_sign.sfi"))
    v = sfverify.verify(chart, wrong, traces=200)
    print("wrong sign:", v.outcome, "at", v.first_divergence["path"])
    assert v.outcome == "FAIL"

    try:
        sfverify.Implementation.load(str(CORPUS / "loop.c"))
    except sfverify.NonconformantError as e:
        print("loop.c:", str(e).splitlines()[0])
    else:
        raise AssertionError("loop.c accepted")

    ms = sfverify.mutants(chart, ref)
    killed = sum(sfverify.verify(chart, m, traces=200).outcome == "FAIL" for *_, m in ms)
    print(f"mutants: {killed}/{len(ms)} rejected")
    assert killed == len(ms)

    rep = sfverify.check_soundness(chart)
    print("soundness cases:", rep["cases"])
    print("ok")


if __name__ == "__main__":
    main()
