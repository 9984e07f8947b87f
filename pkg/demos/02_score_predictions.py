"""Score a system prediction against gold annotations.

The prediction below finds both entities but (a) clips one mention to
its head word and (b) pads another with an extra token.  The demo
evaluates it under all three matching regimes and prints the full
score table, including the dependency-aligned zero mention.
"""

from corefkit import (
    MatchRegime,
    MetricId,
    aggregate,
    evaluate_corpus,
    parse_conllu,
    render_score_table,
)

GOLD = """\
# newdoc id = demo
# sent_id = s1
1	The	the	DET	_	_	3	det	_	Entity=(e1
2	old	old	ADJ	_	_	3	amod	_	_
3	captain	captain	NOUN	_	_	4	nsubj	_	Entity=e1)
4	waved	wave	VERB	_	_	0	root	_	_

# sent_id = s2
1	Sailed	sail	VERB	_	_	0	root	_	_
1.1	he	he	PRON	_	_	_	_	1:nsubj	Entity=(e1)
2	at	at	ADP	_	_	3	case	_	_
3	dawn	dawn	NOUN	_	_	1	obl	_	Entity=(e2)

# sent_id = s3
1	Nobody	nobody	PRON	_	_	2	nsubj	_	_
2	minded	mind	VERB	_	_	0	root	_	_
3	that	that	PRON	_	_	2	obj	_	Entity=(e2)
"""

# e1 clipped to its head word; the zero keeps the right parent but has
# no dependency label; e2's first mention padded with "at"
PRED = """\
# newdoc id = demo
# sent_id = s1
1	The	the	DET	_	_	3	det	_	_
2	old	old	ADJ	_	_	3	amod	_	_
3	captain	captain	NOUN	_	_	4	nsubj	_	Entity=(c1)
4	waved	wave	VERB	_	_	0	root	_	_

# sent_id = s2
1	Sailed	sail	VERB	_	_	0	root	_	_
1.1	he	he	PRON	_	_	_	_	1:_	Entity=(c1)
2	at	at	ADP	_	_	3	case	_	Entity=(c2
3	dawn	dawn	NOUN	_	_	1	obl	_	Entity=c2)

# sent_id = s3
1	Nobody	nobody	PRON	_	_	2	nsubj	_	_
2	minded	mind	VERB	_	_	0	root	_	_
3	that	that	PRON	_	_	2	obj	_	Entity=(c2)
"""


def main() -> None:
    gold = parse_conllu(GOLD)
    pred = parse_conllu(PRED)

    # "The old captain" is matched by bare "captain" under head and
    # partial matching but not under exact; "at dawn" is a superset of
    # gold "dawn", so only head matching accepts it.
    for regime in (MatchRegime.HEAD, MatchRegime.PARTIAL, MatchRegime.EXACT):
        scores = evaluate_corpus(gold, pred, regime=regime)
        conll = scores[MetricId.CONLL]
        print(f"{regime.value:8s} CoNLL F1 = {100 * conll.f1:6.2f} "
              f"(R {100 * conll.recall:.2f} / P {100 * conll.precision:.2f})")

    print("\nfull table (head match, singletons excluded):")
    scores = evaluate_corpus(gold, pred)
    print(render_score_table(aggregate({"demo": scores})))

    zero = scores[MetricId.ZERO_SCORE]
    print("the zero mention was aligned by its parent alone (label missing) and\n"
          f"resolved to the right antecedent entity: zero score F1 = {100 * zero.f1:.1f}")


if __name__ == "__main__":
    main()
