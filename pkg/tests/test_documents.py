import json

import numpy as np
import pytest

from sovkit import documents as docs
from sovkit import rational as R
from sovkit.errors import SchemaError


def sample_lax_doc(r=2, n=2, seed=0):
    rng = np.random.default_rng(seed)
    cm = rng.standard_normal((n + 1, r, r)) + 1j * rng.standard_normal((n + 1, r, r))
    return docs.dump_lax(R.MatPoly(cm))


class TestLaxDocuments:
    def test_round_trip(self):
        doc = sample_lax_doc()
        phi = docs.load_lax(doc)
        doc2 = docs.dump_lax(phi)
        assert doc == doc2

    def test_round_trip_through_json_text(self, tmp_path):
        doc = sample_lax_doc(seed=3)
        path = tmp_path / "lax.json"
        path.write_text(json.dumps(doc))
        phi = docs.load_lax(str(path))
        assert np.array_equal(phi.coeff_mats, docs.load_lax(doc).coeff_mats)

    def test_missing_field_names_the_field(self):
        doc = sample_lax_doc()
        del doc["n"]
        with pytest.raises(SchemaError, match='missing field "n"'):
            docs.load_lax(doc)

    def test_bad_entry_named(self):
        doc = sample_lax_doc()
        doc["coeffs"][0][0][1] = [1.0]
        with pytest.raises(SchemaError, match=r"coeffs\[0\]\[0\]\[1\]"):
            docs.load_lax(doc)

    def test_nonfinite_rejected(self):
        doc = sample_lax_doc()
        doc["coeffs"][0][0][0] = [float("nan"), 0.0]
        with pytest.raises(SchemaError, match="finite"):
            docs.load_lax(doc)

    def test_invalid_json_string(self):
        with pytest.raises(SchemaError, match="invalid JSON"):
            docs.load_document("{not json")


class TestBracketDocuments:
    def test_round_trip(self):
        spec = R.BracketSpec(a=(1.0 + 2.0j, -0.5), b=0.25j)
        doc = docs.dump_bracket(spec)
        spec2 = docs.load_bracket(doc)
        assert spec2 == spec

    def test_missing_b(self):
        with pytest.raises(SchemaError, match='missing field "b"'):
            docs.load_bracket({"a": [[1.0, 0.0]]})


class TestEllipticDocuments:
    def test_load(self):
        doc = {
            "tau": [0.15, 1.05],
            "r": 2,
            "divisor": [{"nu": [0.2, 0.3], "mult": 1}],
            "coeffs": [
                {"a": a, "b": b, "values": [[0.1 * (a + 1), -0.2 * (b + 1)]]}
                for a in range(2) for b in range(2)
            ],
            "z0": [0.0, 0.0],
        }
        params, divisor, coeffs, z0 = docs.load_elliptic(doc)
        assert params.r == 2
        assert divisor.degree == 1
        assert set(coeffs) == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert z0 == 0.0

    def test_bad_divisor_entry(self):
        doc = {"tau": [0.0, 1.0], "r": 2, "divisor": [{"mult": 1}],
               "coeffs": [], "z0": [0.0, 0.0]}
        with pytest.raises(SchemaError, match=r'missing field "divisor\[0\].nu"'):
            docs.load_elliptic(doc)


class TestCsv:
    def test_lossless_floats(self, tmp_path):
        rng = np.random.default_rng(1)
        values = rng.standard_normal(20) * 10.0 ** rng.integers(-8, 8, 20)
        rows = [(i, v) for i, v in enumerate(values)]
        path = tmp_path / "vals.csv"
        docs.write_csv(path, ["idx", "value"], rows)
        header, parsed = docs.read_csv(path)
        assert header == ["idx", "value"]
        for (i, v), row in zip(rows, parsed):
            assert int(row[0]) == i
            assert float(row[1]) == v  # 17 significant digits are lossless
