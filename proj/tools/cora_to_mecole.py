#!/usr/bin/env python3
"""Convert LINQS-style citation data (cora.content / cora.cites) to mecole inputs.

Writes edges.txt, features.txt and labels.txt into the output directory.
With --lcc only the largest connected component is kept (2485 nodes on Cora).
"""
import argparse
import collections
import pathlib
import sys


def read_content(path):
    ids, feats, classes = [], [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        ids.append(parts[0])
        feats.append(parts[1:-1])
        classes.append(parts[-1])
    return ids, feats, classes


def read_cites(path, index):
    edges, dropped = set(), 0
    for line in path.read_text().splitlines():
        parts = line.split()
        if len(parts) != 2:
            continue
        a, b = parts
        if a not in index or b not in index or a == b:
            dropped += 1
            continue
        u, v = sorted((index[a], index[b]))
        edges.add((u, v))
    return edges, dropped


def largest_component(n, edges):
    adj = collections.defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen, best = [False] * n, []
    for s in range(n):
        if seen[s]:
            continue
        comp, stack = [], [s]
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        if len(comp) > len(best):
            best = comp
    return sorted(best)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("content", type=pathlib.Path)
    ap.add_argument("cites", type=pathlib.Path)
    ap.add_argument("out", type=pathlib.Path)
    ap.add_argument("--lcc", action="store_true", help="keep the largest connected component only")
    args = ap.parse_args()

    ids, feats, classes = read_content(args.content)
    index = {p: i for i, p in enumerate(ids)}
    edges, dropped = read_cites(args.cites, index)
    keep = largest_component(len(ids), edges) if args.lcc else list(range(len(ids)))
    remap = {old: new for new, old in enumerate(keep)}
    edges = sorted((remap[u], remap[v]) for u, v in edges if u in remap and v in remap)

    names = {c: i for i, c in enumerate(sorted(set(classes[i] for i in keep)))}
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "edges.txt").write_text("".join(f"{u} {v}\n" for u, v in edges))
    (args.out / "features.txt").write_text("".join(" ".join(feats[i]) + "\n" for i in keep))
    (args.out / "labels.txt").write_text("".join(f"{names[classes[i]]}\n" for i in keep))
    print(f"{len(keep)} nodes, {len(edges)} edges, {len(names)} classes"
          f" ({dropped} citation lines skipped)", file=sys.stderr)


if __name__ == "__main__":
    main()
