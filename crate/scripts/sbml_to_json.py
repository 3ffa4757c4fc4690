#!/usr/bin/env python3
"""Convert an SBML level 3 / fbc v2 model into the JSON model layout read by
the `bioknock` toolkit (same field names as the COBRA JSON schema).

Usage: sbml_to_json.py INPUT.xml[.gz] OUTPUT.json
"""
import gzip
import json
import sys
import xml.etree.ElementTree as ET

SBML = "{http://www.sbml.org/sbml/level3/version1/core}"
FBC = "{http://www.sbml.org/sbml/level3/version1/fbc/version2}"


def _balanced(text):
    depth = 0
    for ch in text:
        depth += {"(": 1, ")": -1}.get(ch, 0)
        if depth < 0:
            return False
    return depth == 0


def strip(prefix, ident):
    return ident[len(prefix):] if ident.startswith(prefix) else ident


def gene_rule(node):
    tag = node.tag.replace(FBC, "")
    if tag == "geneProductRef":
        return strip("G_", node.get(f"{FBC}geneProduct"))
    parts = [gene_rule(child) for child in node]
    if len(parts) == 1:
        return parts[0]
    joined = f" {tag} ".join(parts)
    return f"({joined})"


def main(src, dst):
    opener = gzip.open if src.endswith(".gz") else open
    with opener(src, "rb") as fh:
        root = ET.parse(fh).getroot()
    model = root.find(f"{SBML}model")
    params = {
        p.get("id"): float(p.get("value"))
        for p in model.iter(f"{SBML}parameter")
    }
    metabolites = []
    for sp in model.iter(f"{SBML}species"):
        metabolites.append(
            {
                "id": strip("M_", sp.get("id")),
                "name": sp.get("name", ""),
                "compartment": sp.get("compartment", ""),
                "charge": int(sp.get(f"{FBC}charge", "0")),
                "formula": sp.get(f"{FBC}chemicalFormula", ""),
            }
        )
    objective = set()
    for fo in model.iter(f"{FBC}fluxObjective"):
        objective.add(fo.get(f"{FBC}reaction"))
    reactions = []
    for rx in model.iter(f"{SBML}reaction"):
        stoich = {}
        for tag, sign in (("listOfReactants", -1.0), ("listOfProducts", 1.0)):
            lst = rx.find(f"{SBML}{tag}")
            if lst is None:
                continue
            for ref in lst:
                mid = strip("M_", ref.get("species"))
                stoich[mid] = stoich.get(mid, 0.0) + sign * float(ref.get("stoichiometry", "1"))
        gpa = rx.find(f"{FBC}geneProductAssociation")
        rule = ""
        if gpa is not None and len(gpa):
            rule = gene_rule(gpa[0])
            if rule.startswith("(") and rule.endswith(")"):
                inner = rule[1:-1]
                if inner.count("(") == inner.count(")") and _balanced(inner):
                    rule = inner
        entry = {
            "id": strip("R_", rx.get("id")),
            "name": rx.get("name", ""),
            "metabolites": stoich,
            "lower_bound": params[rx.get(f"{FBC}lowerFluxBound")],
            "upper_bound": params[rx.get(f"{FBC}upperFluxBound")],
            "gene_reaction_rule": rule,
        }
        if rx.get("id") in objective:
            entry["objective_coefficient"] = 1.0
        reactions.append(entry)
    genes = []
    for gp in model.iter(f"{FBC}geneProduct"):
        genes.append({"id": strip("G_", gp.get(f"{FBC}id")), "name": gp.get(f"{FBC}label", "")})
    out = {
        "id": model.get("id"),
        "metabolites": metabolites,
        "reactions": reactions,
        "genes": genes,
        "version": "1",
    }
    with open(dst, "w") as fh:
        json.dump(out, fh, indent=1, sort_keys=False)
        fh.write("\n")


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
