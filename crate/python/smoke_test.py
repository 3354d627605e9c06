"""Smoke test for the Python bindings.

Build and install first:  maturin build --release -m crates/py/Cargo.toml && pip install target/wheels/*.whl
"""

import math
import os
import sys
import tempfile

import stockflow

HERE = os.path.dirname(os.path.abspath(__file__))
MODELS = os.path.join(HERE, "..", "models")


def check(cond, what):
    if not cond:
        print(f"FAIL {what}")
        sys.exit(1)
    print(f"ok   {what}")


def main():
    names = stockflow.catalog()
    check("covid_composite" in names, "catalog lists the COVID composite")

    covid = stockflow.model("covid_composite")
    check(covid.stocks == ["S", "E", "I", "R", "HICU", "HNICU", "VP", "VF", "IA"], "composite stock order")
    check(covid.validate() == [], "composite validates")
    check(len(covid.equations().splitlines()) == 9, "nine equations")

    fillers = {
        "seirh": stockflow.model("covid_seirh"),
        "vaccination": stockflow.model("covid_vaccination"),
        "asymptomatic": stockflow.model("covid_asymptomatic"),
    }
    glued = stockflow.oapply(os.path.join(MODELS, "covid_pattern.json"), fillers)
    check(glued == covid, "oapply on the pattern file reproduces the composite")
    check(stockflow.is_isomorphic(glued, covid), "iso check")

    sir = stockflow.model("sir_simple")
    params = {"beta": 0.3, "t_r": 10.0, "t_w": 180.0}
    dx = sir.vector_field([990.0, 10.0, 0.0], params)
    check(abs(sum(dx)) < 1e-12, "SIR field conserves the total")
    cols, times, states = sir.simulate({"S": 999000.0, "I": 1000.0, "R": 0.0}, params, 100.0, 0.1)
    check(cols == ["S", "I", "R"] and times[-1] == 100.0, "simulate lands on t1")
    check(max(abs(sum(x) - 1e6) for x in states) < 1e-8, "simulated total conserved")

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "sir.json")
        sir.save(path)
        check(stockflow.Diagram.load(path) == sir, "save/load round-trip")

    sird, lumped = stockflow.model("sird"), stockflow.model("sird_lumped")
    gap = stockflow.check_morphism(
        os.path.join(MODELS, "sird_lumping.json"), sird, lumped, {"beta": 0.3, "N": 1e6, "t_r": 10.0, "f_d": 0.01}
    )
    check(gap <= 1e-12, "lumping morphism satisfies the flow equation")

    try:
        stockflow.Diagram.from_json('{"kind": "stockflow", "version": 1}')
        check(False, "malformed document rejected")
    except ValueError:
        check(True, "malformed document rejected")

    decay = stockflow.Diagram.from_json(
        '{"kind": "stockflow", "version": 1, "stocks": ["x", "y"],'
        ' "flows": [{"name": "f", "up": "x", "down": "y", "function": "x"}],'
        ' "links": [{"src": "x", "tgt": "f"}]}'
    )
    _, _, states = decay.simulate({"x": 1.0, "y": 0.0}, {}, 1.0, 0.01)
    check(abs(states[-1][0] - math.exp(-1)) < 1e-6, "RK4 decay matches exp(-1)")
    print("all checks passed")


if __name__ == "__main__":
    main()
