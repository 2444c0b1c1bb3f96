import json
import random
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import pytest

from swbindex.estimator import CATEGORIES

# Word stock per category for the synthetic fixture corpus. Unspaced
# tokenization turns these katakana runs into bigram/trigram features.
CATEGORY_WORDS = {
    "positive": ["タノシイ", "ウレシイ", "サイコウ", "マンゾク", "ヨロコビ"],
    "neutral": ["フツウダ", "マアマア", "トクニナシ", "シラナイ", "ドチラデモ"],
    "negative": ["カナシイ", "サイアク", "ツカレタ", "イライラ", "ザンネン"],
    "offtopic": ["テンキヨホウ", "デンシャ", "コマーシャル", "セール", "ニュース"],
}
SHARED_WORDS = ["キョウハ", "トテモ", "ナンダカ", "ヤッパリ"]


def synth_post(rng: random.Random, post_id: str, day: date, category: str) -> dict:
    # Punctuation between phrases keeps n-grams within a phrase, so posts
    # built from the same word pair share a signature.
    words = [rng.choice(CATEGORY_WORDS[category]), rng.choice(SHARED_WORDS)]
    if rng.random() < 0.3:
        words.insert(1, rng.choice(CATEGORY_WORDS[category]))
    rng.shuffle(words)
    ts = datetime(day.year, day.month, day.day, rng.randrange(24), rng.randrange(60), tzinfo=timezone.utc)
    return {
        "id": post_id,
        "created_at": ts.isoformat().replace("+00:00", "Z"),
        "text": "、".join(words),
        "lang": "ja",
        "country": "jp",
        "retweet": False,
    }


def build_fixture_corpus(root: Path, n_posts: int = 1000, n_days: int = 10, seed: int = 20170301):
    """A posts file plus per-dimension training exports with known labels.

    The mixing proportions drift across days so the resulting index moves.
    Returns (posts_path, training_dir, categories_by_id).
    """
    rng = random.Random(seed)
    start = date(2017, 3, 1)
    records = []
    categories = {}
    for i in range(n_posts):
        day = start + timedelta(days=i % n_days)
        tilt = (i % n_days) / (n_days - 1)
        weights = [0.35 + 0.25 * tilt, 0.2, 0.35 - 0.25 * tilt, 0.1]
        category = rng.choices(CATEGORIES, weights=weights)[0]
        post_id = f"p{i:05d}"
        records.append(synth_post(rng, post_id, day, category))
        categories[post_id] = category

    posts_path = root / "posts.jsonl"
    posts_path.write_text(
        "".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records), encoding="utf-8"
    )

    training_dir = root / "training"
    training_dir.mkdir(exist_ok=True)
    train_ids = rng.sample(sorted(categories), 320)
    for dim in ("emo", "sat", "vit", "res", "fun", "tru", "rel", "wor"):
        lines = [
            json.dumps({"post_id": pid, "dimension": dim, "label": categories[pid]})
            for pid in train_ids
        ]
        (training_dir / f"{dim}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return posts_path, training_dir, categories


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("fixture_corpus")
    posts_path, training_dir, categories = build_fixture_corpus(root)
    return {"posts": posts_path, "training": training_dir, "categories": categories}
