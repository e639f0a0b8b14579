"""The metric battery applied to two competing recommendation slates.

One slate chases pure relevance, the other trades a little accuracy for
provider balance and novelty. The numbers show what each side gives up.
"""

from agorank import (
    Catalog,
    Item,
    divergence,
    gini_exposure,
    l_half_balance,
    ndcg_at_k,
    normalized_entropy,
    poplift,
    recall_at_k,
)

catalog = Catalog(
    [
        Item("beach-main", "coast-co", frozenset({"beach"}), popularity=0.9),
        Item("beach-cove", "coast-co", frozenset({"beach", "nature"}), popularity=0.4),
        Item("museum-art", "city-arts", frozenset({"museum"}), popularity=0.7),
        Item("trail-ridge", "hill-club", frozenset({"trail", "nature"}), popularity=0.1),
    ]
)

relevance = {"beach-main": 1.0, "beach-cove": 0.8, "museum-art": 0.3, "trail-ridge": 0.2}
history = ["beach-main", "beach-main", "museum-art"]

slates = {
    "relevance-only": ["beach-main", "beach-cove", "museum-art"],
    "balanced": ["beach-cove", "trail-ridge", "museum-art"],
}

for name, slate in slates.items():
    print(f"{name}: {slate}")
    print(f"  ndcg@3    {ndcg_at_k(slate, relevance, 3):.4f}")
    print(f"  recall@3  {recall_at_k(slate, set(relevance), 3):.4f}")

    # one exposure unit per recommended item, grouped by provider
    exposure = {p: 0.0 for p in catalog.providers}
    for item_id in slate:
        exposure[catalog.provider_of(item_id)] += 1.0
    shares = [exposure[p] for p in sorted(exposure)]
    print(f"  provider exposure {dict(sorted(exposure.items()))}")
    print(f"  gini      {gini_exposure(shares):.4f}")

    print(f"  poplift   {poplift(history, slate, catalog):+.4f}")

    # category profile of the slate vs the user's history
    def category_profile(item_ids):
        counts = {}
        for item_id in item_ids:
            for cat in catalog[item_id].categories:
                counts[cat] = counts.get(cat, 0) + 1
        total = sum(counts.values())
        return counts, total

    hist_counts, hist_total = category_profile(history)
    rec_counts, rec_total = category_profile(slate)
    support = sorted(set(hist_counts) | set(rec_counts))
    p = [hist_counts.get(c, 0) / hist_total for c in support]
    q = [rec_counts.get(c, 0) / rec_total for c in support]
    print(f"  categories {support}")
    print(f"  js        {divergence(p, q, 'js'):.4f}")
    print(f"  entropy   {normalized_entropy(q):.4f}")
    print()

# how evenly a hypothetical set of per-agent satisfaction fractions spreads:
# all mass on one agent scores 1.0, an even split scores the agent count
print("l_half balance, concentrated vs even:")
print(f"  [1.0, 0.0, 0.0] -> {l_half_balance([1.0, 0.0, 0.0]):.4f}")
print(f"  [1/3, 1/3, 1/3] -> {l_half_balance([1 / 3, 1 / 3, 1 / 3]):.4f}")
