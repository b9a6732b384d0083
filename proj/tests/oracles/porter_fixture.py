"""Freeze reference Porter stems (NLTK, Martin's reference variant).

Usage: python3 porter_fixture.py <text files...> > porter_vocab.tsv
"""
import re
import sys

from nltk.stem.porter import PorterStemmer

CLASSIC = """caresses ponies ties caress cats feed agreed plastered bled motoring sing
conflated troubled sized hopping tanned falling hissing fizzed failing filing happy sky
relational conditional rational valenci hesitanci digitizer conformabli radicalli
differentli vileli analogousli vietnamization predication operator feudalism
decisiveness hopefulness callousness formaliti sensitiviti sensibiliti triplicate
formative formalize electriciti electrical hopeful goodness revival allowance inference
airliner gyroscopic adjustable defensible irritant replacement adjustment dependent
adoption homologou communism activate angulariti homologous effective bowdlerize
probate rate cease controll roll generalization running runs columbia river archaeology
logically biology sensibility""".split()


def main() -> None:
    stemmer = PorterStemmer(mode=PorterStemmer.MARTIN_EXTENSIONS)
    words = set(CLASSIC)
    for path in sys.argv[1:]:
        with open(path, encoding="utf-8", errors="ignore") as fh:
            words.update(w.lower() for w in re.findall(r"[A-Za-z]{3,}", fh.read()))
    for w in sorted(words):
        print(f"{w}\t{stemmer.stem(w)}")


if __name__ == "__main__":
    main()
