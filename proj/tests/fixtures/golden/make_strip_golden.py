# Regenerates strip_comments goldens from a raw tree-sitter parse.
# usage: python3 make_strip_golden.py <source.c> <out.json>
import json
import sys

import tree_sitter_c
from tree_sitter import Language, Parser


def comments(node):
    if node.type == "comment":
        yield node
    for child in node.children:
        yield from comments(child)


def main():
    src = open(sys.argv[1], "rb").read()
    tree = Parser(Language(tree_sitter_c.language())).parse(src)
    out = {}
    for node in tree.root_node.children:
        stack = [node]
        while stack:
            n = stack.pop()
            if n.type == "function_definition":
                text = src[n.start_byte:n.end_byte]
                for c in sorted(comments(n), key=lambda c: -c.start_byte):
                    a, b = c.start_byte - n.start_byte, c.end_byte - n.start_byte
                    text = text[:a] + b" " + text[b:]
                name = n.child_by_field_name("declarator")
                while name.child_by_field_name("declarator") is not None:
                    name = name.child_by_field_name("declarator")
                out[src[name.start_byte:name.end_byte].decode()] = text.decode()
            elif n.type in ("preproc_ifdef", "preproc_if", "preproc_else"):
                stack.extend(reversed(n.children))
    with open(sys.argv[2], "w") as f:
        json.dump(out, f, indent=2)
        f.write("\n")


main()
