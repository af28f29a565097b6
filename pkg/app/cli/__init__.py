from app.cli import bound, cases, class_check, equidist, lemma, sieve_verify

SUBCOMMANDS = [class_check, equidist, sieve_verify, lemma, bound, cases]
