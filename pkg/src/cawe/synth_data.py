"""Deterministic synthetic speech-like corpus and evaluation task generators.

Words are cluster-structured frame prototypes; utterances concatenate
time-warped, noise-perturbed word realizations with exact span
bookkeeping, giving ground-truth word boundaries to score attention
segmentation against. Cluster membership doubles as the semantic signal
for the similarity / classification / intent tasks.
"""

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .numerics import SplitMix64

_FEAT_MAGIC = b"A2WF"
_FEAT_VERSION = 1


@dataclass(frozen=True)
class CorpusConfig:
    vocab_size: int = 30
    num_clusters: int = 6
    input_dim: int = 16
    proto_frames: int = 8
    num_utts: int = 2000
    words_min: int = 3
    words_max: int = 8
    dur_min: int = 4
    dur_max: int = 10
    noise_sigma: float = 0.1
    word_spread: float = 0.55
    zipf: bool = False
    zipf_exponent: float = 1.0
    topic_coherence: float = 0.0

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError("vocab_size must be >= 4")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.dur_min < 2 or self.dur_max < self.dur_min:
            raise ValueError("need dur_max >= dur_min >= 2")
        if self.words_max < self.words_min or self.words_min < 1:
            raise ValueError("bad words_min/words_max range")
        if self.num_clusters < 2 or self.num_clusters > self.vocab_size:
            raise ValueError("need 2 <= num_clusters <= vocab_size")


@dataclass
class WordPrototype:
    word: str
    cluster: int
    frames: np.ndarray  # (proto_frames, input_dim)
    duration_range: tuple


@dataclass
class WordInventory:
    """The closed word list shared by the corpus and all task generators."""

    config: CorpusConfig
    prototypes: dict = field(default_factory=dict)  # word -> WordPrototype

    @property
    def words(self):
        return list(self.prototypes.keys())

    def cluster_of(self, word):
        return self.prototypes[word].cluster

    def cluster_members(self, cluster):
        return [w for w, p in self.prototypes.items() if p.cluster == cluster]


@dataclass
class SynthUtterance:
    utterance_id: int
    features: np.ndarray        # (T, input_dim) float64
    words: list                 # word strings
    spans: list                 # [start, end) raw-frame ranges, one per word


def make_inventory(cfg, seed):
    """Cluster centers plus per-word offsets, deterministic in seed."""
    rng = SplitMix64(seed).derive(0xC1)
    centers = [rng.normal_array((cfg.proto_frames, cfg.input_dim))
               for _ in range(cfg.num_clusters)]
    width = len(str(cfg.vocab_size - 1))
    inv = WordInventory(cfg)
    for w in range(cfg.vocab_size):
        cluster = w % cfg.num_clusters
        frames = centers[cluster] + cfg.word_spread * rng.normal_array(
            (cfg.proto_frames, cfg.input_dim))
        name = f"w{w:0{width}d}"
        inv.prototypes[name] = WordPrototype(name, cluster, frames,
                                             (cfg.dur_min, cfg.dur_max))
    return inv


def _realize(proto, duration, noise_sigma, rng):
    """Nearest-neighbor time warp of the prototype plus Gaussian noise."""
    P = proto.frames.shape[0]
    idx = (np.arange(duration) * P) // duration
    frames = proto.frames[idx].copy()
    if noise_sigma > 0:
        frames += rng.normal_array(frames.shape, scale=noise_sigma)
    return frames


def _word_weights(cfg):
    if not cfg.zipf:
        return None
    ranks = np.arange(1, cfg.vocab_size + 1, dtype=np.float64)
    w = ranks ** (-cfg.zipf_exponent)
    return np.cumsum(w / w.sum())


def _pick(rng, n, cum=None):
    if cum is None:
        return rng.randint_below(n)
    return int(np.searchsorted(cum, rng.uniform(), side="right"))


def gen_corpus(cfg, seed):
    """Generate the full utterance list; pure function of (cfg, seed)."""
    inv = make_inventory(cfg, seed)
    words = inv.words
    cum = _word_weights(cfg)
    base = SplitMix64(seed)
    utts = []
    for u in range(cfg.num_utts):
        rng = base.derive(0x0700 + u)
        n_words = cfg.words_min + rng.randint_below(
            cfg.words_max - cfg.words_min + 1)
        topic = rng.randint_below(cfg.num_clusters)
        chosen = []
        for _ in range(n_words):
            if cfg.topic_coherence > 0 and rng.uniform() < cfg.topic_coherence:
                members = inv.cluster_members(topic)
                chosen.append(members[rng.randint_below(len(members))])
            else:
                chosen.append(words[_pick(rng, cfg.vocab_size, cum)])
        pieces = []
        spans = []
        cursor = 0
        for w in chosen:
            dur = cfg.dur_min + rng.randint_below(cfg.dur_max - cfg.dur_min + 1)
            pieces.append(_realize(inv.prototypes[w], dur, cfg.noise_sigma, rng))
            spans.append((cursor, cursor + dur))
            cursor += dur
        utts.append(SynthUtterance(u, np.vstack(pieces), chosen, spans))
    return utts


# ---------------------------------------------------------------------------
# evaluation tasks

def similarity_gold(sent_a, sent_b, cluster_of):
    """Position-wise credit: 1 same word, 0.5 same cluster, 0 otherwise.

    Normalized by the longer sentence and scaled to [0, 5].
    """
    n = max(len(sent_a), len(sent_b))
    credit = 0.0
    for a, b in zip(sent_a, sent_b):
        if a == b:
            credit += 1.0
        elif cluster_of(a) == cluster_of(b):
            credit += 0.5
    return 5.0 * credit / n


def gen_similarity_task(inv, num_pairs, seed, len_range=(3, 8)):
    """Sentence pairs whose gold score tracks word/cluster overlap."""
    rng = SplitMix64(seed).derive(0x51)
    words = inv.words
    lo, hi = len_range
    pairs = []
    for _ in range(num_pairs):
        n = lo + rng.randint_below(hi - lo + 1)
        sent_a = [words[rng.randint_below(len(words))] for _ in range(n)]
        p_same = rng.randint_below(5) / 4.0
        sent_b = []
        for a in sent_a:
            u = rng.uniform()
            if u < p_same:
                sent_b.append(a)
                continue
            siblings = [w for w in inv.cluster_members(inv.cluster_of(a))
                        if w != a]
            if u < p_same + (1.0 - p_same) * 0.5 and siblings:
                sent_b.append(siblings[rng.randint_below(len(siblings))])
            else:
                others = [w for w in words
                          if inv.cluster_of(w) != inv.cluster_of(a)]
                sent_b.append(others[rng.randint_below(len(others))])
        pairs.append((sent_a, sent_b,
                      similarity_gold(sent_a, sent_b, inv.cluster_of)))
    return pairs


def _class_markers(inv, num_classes, offset):
    """One marker word per class: word `offset` of each leading cluster."""
    markers = []
    for c in range(num_classes):
        members = inv.cluster_members(c)
        if len(members) <= offset:
            raise ValueError("not enough words per cluster for markers")
        markers.append(members[offset])
    return markers


def gen_cls_task(inv, num_sentences, seed, num_classes=4, len_range=(3, 8)):
    """Label = class of the one marker word planted in the sentence."""
    if num_classes > inv.config.num_clusters:
        raise ValueError("num_classes exceeds cluster count")
    rng = SplitMix64(seed).derive(0xC5)
    markers = _class_markers(inv, num_classes, offset=1)
    fillers = [w for w in inv.words if w not in markers]
    lo, hi = len_range
    rows = []
    for _ in range(num_sentences):
        label = rng.randint_below(num_classes)
        n = lo + rng.randint_below(hi - lo + 1)
        sent = [fillers[rng.randint_below(len(fillers))] for _ in range(n)]
        sent[rng.randint_below(n)] = markers[label]
        rows.append((sent, label))
    return rows


def gen_slu_task(inv, num_sentences, seed, num_intents=5, len_range=(3, 8)):
    """Template grammar: intent marker word first, then filler slots."""
    if num_intents > inv.config.num_clusters:
        raise ValueError("num_intents exceeds cluster count")
    rng = SplitMix64(seed).derive(0x57)
    markers = _class_markers(inv, num_intents, offset=0)
    fillers = [w for w in inv.words if w not in markers]
    lo, hi = len_range
    rows = []
    for _ in range(num_sentences):
        intent = rng.randint_below(num_intents)
        n = max(lo, 2) + rng.randint_below(hi - lo + 1)
        sent = [markers[intent]]
        sent += [fillers[rng.randint_below(len(fillers))] for _ in range(n - 1)]
        rows.append((sent, intent))
    return rows


# ---------------------------------------------------------------------------
# on-disk formats

def write_features(path, frames):
    """Binary per-utterance features: A2WF, version, T, d, f32 LE frames."""
    frames = np.asarray(frames)
    with open(path, "wb") as fh:
        fh.write(_FEAT_MAGIC)
        fh.write(struct.pack("<III", _FEAT_VERSION,
                             frames.shape[0], frames.shape[1]))
        fh.write(frames.astype("<f4").tobytes(order="C"))


def read_features(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise FormatError(f"{path}: truncated feature header")
    if blob[:4] != _FEAT_MAGIC:
        raise FormatError(f"{path}: bad magic, not an A2WF feature file")
    version, T, d = struct.unpack_from("<III", blob, 4)
    if version != _FEAT_VERSION:
        raise FormatError(f"{path}: unsupported feature version {version}")
    need = 16 + 4 * T * d
    if len(blob) != need:
        raise FormatError(f"{path}: expected {need} bytes, got {len(blob)}")
    data = np.frombuffer(blob[16:], dtype="<f4").reshape(T, d)
    return data.astype(np.float64)


def write_corpus(corpus, out_dir):
    """Corpus layout: features/utt_#####.a2wf, transcripts.txt, spans.txt."""
    feat_dir = os.path.join(out_dir, "features")
    os.makedirs(feat_dir, exist_ok=True)
    with open(os.path.join(out_dir, "transcripts.txt"), "w",
              encoding="utf-8") as tf, \
         open(os.path.join(out_dir, "spans.txt"), "w",
              encoding="utf-8") as sf:
        for utt in corpus:
            write_features(
                os.path.join(feat_dir, f"utt_{utt.utterance_id:05d}.a2wf"),
                utt.features)
            tf.write(" ".join(utt.words) + "\n")
            for k, (start, end) in enumerate(utt.spans):
                sf.write(f"{utt.utterance_id} {k} {start} {end}\n")


def load_corpus(corpus_dir):
    """Inverse of write_corpus; line order defines utterance ids."""
    tr_path = os.path.join(corpus_dir, "transcripts.txt")
    if not os.path.exists(tr_path):
        raise FormatError(f"{corpus_dir}: missing transcripts.txt")
    with open(tr_path, encoding="utf-8") as fh:
        transcripts = [line.split() for line in fh.read().splitlines()]
    spans = {}
    sp_path = os.path.join(corpus_dir, "spans.txt")
    if os.path.exists(sp_path):
        with open(sp_path, encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                parts = line.split()
                if len(parts) != 4:
                    raise FormatError(f"{sp_path}:{ln}: expected 4 fields")
                u, k, start, end = (int(p) for p in parts)
                spans.setdefault(u, []).append((k, start, end))
    utts = []
    for u, words in enumerate(transcripts):
        feats = read_features(
            os.path.join(corpus_dir, "features", f"utt_{u:05d}.a2wf"))
        utt_spans = [(s, e) for _, s, e in sorted(spans.get(u, []))]
        utts.append(SynthUtterance(u, feats, words, utt_spans))
    return utts


def write_similarity_task(pairs, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sent_a, sent_b, gold in pairs:
            fh.write(f"{' '.join(sent_a)}\t{' '.join(sent_b)}\t{gold:.4f}\n")


def load_similarity_task(path):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise FormatError(f"{path}:{ln}: expected 3 tab-separated fields")
            try:
                gold = float(parts[2])
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: bad score {parts[2]!r}") from exc
            pairs.append((parts[0].split(), parts[1].split(), gold))
    if not pairs:
        raise FormatError(f"{path}: empty task file")
    return pairs


def write_labeled_task(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sent, label in rows:
            fh.write(f"{' '.join(sent)}\t{label}\n")


def load_labeled_task(path):
    rows = []
    with open(path, encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise FormatError(f"{path}:{ln}: expected 2 tab-separated fields")
            try:
                label = int(parts[1])
            except ValueError as exc:
                raise FormatError(f"{path}:{ln}: bad label {parts[1]!r}") from exc
            rows.append((parts[0].split(), label))
    if not rows:
        raise FormatError(f"{path}: empty task file")
    return rows
