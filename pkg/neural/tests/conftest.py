import random

import pytest

from kgfuse_neural.data import Dataset, load_dataset

N_CLUSTERS = 10
N_ITEMS = 40  # 50 entities total


def toy_world(rng: random.Random):
    """A 50-entity graph with a planted compositional pattern.

    Items belong to clusters; clusters point at other clusters through
    `likes`; `likes_via(item) = likes(member_of(item))`. 80% of the
    likes_via facts are train, the rest are the held-out test set, so a
    scorer must generalize through the cluster structure (or be told the
    answer through the logical plane).
    """
    items = [f"item{i:02d}" for i in range(N_ITEMS)]
    clusters = [f"cluster{i}" for i in range(N_CLUSTERS)]
    cluster_of = {item: clusters[i % N_CLUSTERS] for i, item in enumerate(items)}
    likes = {clusters[i]: clusters[(i + 3) % N_CLUSTERS] for i in range(N_CLUSTERS)}

    train = [(item, "member_of", cluster_of[item]) for item in items]
    train += [(c, "likes", likes[c]) for c in clusters]
    via = [(item, "likes_via", likes[cluster_of[item]]) for item in items]
    rng.shuffle(via)
    held_out = via[: N_ITEMS // 5]
    train += via[N_ITEMS // 5 :]
    return train, held_out


def write_triples(path, triples):
    with open(path, "w", encoding="utf-8") as fh:
        for h, r, t in triples:
            fh.write(f"{h}\t{r}\t{t}\n")


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory) -> Dataset:
    tmp = tmp_path_factory.mktemp("toyworld")
    train, test = toy_world(random.Random(1234))
    write_triples(tmp / "train.txt", train)
    write_triples(tmp / "test.txt", test)
    data = load_dataset(str(tmp / "train.txt"), test_path=str(tmp / "test.txt"))
    assert data.vocab.num_entities == N_ITEMS + N_CLUSTERS
    return data


@pytest.fixture(scope="session")
def toy_logical_export(toy_dataset) -> dict:
    """Composition-derived logical scores for every likes_via query, in the
    rule engine's export shape. Derived from member_of + likes edges only,
    never from the direct likes_via edge, so training queries leak nothing."""
    data = toy_dataset
    vocab = data.vocab
    member_of = vocab.relation_ids["member_of"]
    likes = vocab.relation_ids["likes"]
    likes_via = vocab.relation_ids["likes_via"]

    member = {}
    liked = {}
    for h, r, t in data.train:
        if r == member_of:
            member[h] = t
        elif r == likes:
            liked[h] = t

    export = {}
    for item, cluster in member.items():
        export[(item, likes_via)] = {liked[cluster]: 0.9}
        # head-side query: which items like-via this cluster
        target = liked[cluster]
        inv = vocab.reciprocal(likes_via)
        export.setdefault((target, inv), {})[item] = 0.9
    return export


def small_model_config(num_entities, num_relations, use_sp=False, batch_norm=True):
    from kgfuse_neural.model import ModelConfig

    return ModelConfig(
        num_entities=num_entities,
        num_relations=num_relations,
        dim=32,
        reshape=(4, 8),
        channels=8,
        input_dropout=0.1,
        feature_dropout=0.1,
        hidden_dropout=0.1,
        batch_norm=batch_norm,
        use_sp=use_sp,
    )
