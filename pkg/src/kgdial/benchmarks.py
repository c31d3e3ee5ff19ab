"""Deterministic synthetic worlds: knowledge stores, dialogues and benchmark splits.

Everything here is generated from a small hand-written lexicon plus a seed,
so fixtures and benchmark numbers are reproducible anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import Corpus, DialogueContext, KnowledgeSnippet, KnowledgeStore, Speaker, Turn, TurnLabel
from .generation import GenExample

# topic: (title, positive body, negative body, query paraphrases)
TOPICS: dict[str, dict[str, tuple[str, str, str, tuple[str, ...]]]] = {
    "hotel": {
        "parking": (
            "Is there free parking?",
            "Yes, {name} offers free parking on site for all guests.",
            "No, {name} does not have its own car park, but a public garage is two streets away.",
            ("is the parking free", "do they charge for parking", "is parking included in the price", "is there parking for my car"),
        ),
        "pets": (
            "Are pets allowed?",
            "Yes, {name} welcomes dogs and cats for a small cleaning fee.",
            "No, {name} does not allow pets except registered service animals.",
            ("can i bring my pets", "are pets allowed in the rooms", "is it ok to travel with pets", "do they accept pets"),
        ),
        "wifi": (
            "Is wifi available?",
            "Yes, {name} has free wifi in every room and in the lobby.",
            "Wifi at {name} is only available in the lobby and costs five pounds a day.",
            ("will i have wifi access", "is there wifi in the rooms", "do the rooms have wifi", "is the wifi free"),
        ),
        "checkin": (
            "What time is check in?",
            "Check in at {name} starts at two in the afternoon.",
            "Check in at {name} starts at four in the afternoon and early arrival is not possible.",
            ("when can i check in", "what time can i check in", "how early is check in", "is early check in possible"),
        ),
        "gym": (
            "Is there a gym?",
            "Yes, {name} has a small fitness room open all day.",
            "No, {name} has no gym, but guests get a discount at a nearby fitness club.",
            ("can i use a gym there", "do they have a gym or fitness room", "is there a gym to exercise", "any gym on site"),
        ),
        "breakfast": (
            "Is breakfast included?",
            "Yes, a full english breakfast is included in every stay at {name}.",
            "Breakfast at {name} is not included and costs ten pounds per person.",
            ("do i get breakfast with the room", "is breakfast free", "will breakfast cost extra", "is there breakfast included"),
        ),
    },
    "restaurant": {
        "vegan": (
            "Do you have vegan options?",
            "Yes, {name} has several vegan dishes marked on the menu.",
            "Sorry, {name} has no vegan main courses, only a side salad.",
            ("is there anything vegan", "can i eat vegan food there", "do they serve vegan meals", "any vegan dishes"),
        ),
        "outdoor": (
            "Is there outdoor seating?",
            "Yes, {name} has a garden terrace with twenty tables.",
            "No, {name} only has indoor seating.",
            ("can we sit outdoor", "do they have outdoor seating", "are there outdoor tables", "is there outdoor seating in a garden"),
        ),
        "reservation": (
            "Do I need a reservation?",
            "Reservations at {name} are recommended on weekends but walk ins are welcome.",
            "{name} only accepts walk ins and does not take bookings.",
            ("should i make a reservation", "do they take a reservation", "do i need a reservation for dinner", "is a reservation necessary"),
        ),
        "alcohol": (
            "Do you serve alcohol?",
            "Yes, {name} has a full bar with local beers and wine.",
            "No, {name} does not serve alcohol but you may bring your own wine.",
            ("can i order alcohol there", "do they serve alcohol", "is alcohol available", "can i drink alcohol with dinner"),
        ),
        "kids": (
            "Is there a kids menu?",
            "Yes, {name} offers a kids menu for children under twelve.",
            "{name} has no separate kids menu but can serve half portions.",
            ("do they have a kids menu", "is it good for kids", "is there a menu for kids", "any kids menu"),
        ),
        "parking": (
            "Is there parking?",
            "Yes, {name} has a free car park behind the building.",
            "No, {name} has no parking, the nearest garage is on the high street.",
            ("can i park at the restaurant", "is there parking", "is there parking for the car", "do they have parking spaces"),
        ),
    },
    "attraction": {
        "wheelchair": (
            "Is it wheelchair accessible?",
            "Yes, {name} is fully accessible with ramps and lifts.",
            "Only the ground floor of {name} is accessible by wheelchair.",
            ("can i visit in a wheelchair", "is it wheelchair accessible", "is there wheelchair access", "is it accessible for a wheelchair"),
        ),
        "photo": (
            "Can I take photos?",
            "Yes, photography without flash is allowed everywhere in {name}.",
            "No, photography is not permitted inside {name}.",
            ("am i allowed to take photos", "can i take photos inside", "are photos permitted", "may i take photos"),
        ),
        "hours": (
            "What are the opening hours?",
            "{name} is open from nine in the morning to five in the evening every day.",
            "{name} opens at ten and closes at four, and it is closed on mondays.",
            ("what are the opening hours", "when are the opening hours", "what hours is it open", "what are their hours"),
        ),
        "tours": (
            "Are guided tours available?",
            "Yes, {name} runs guided tours every hour for free.",
            "{name} offers audio guides but no guided tours.",
            ("can i join a guided tour", "are there guided tours", "do they do tours", "are there tours available"),
        ),
        "cafe": (
            "Is there a cafe?",
            "Yes, {name} has a cafe serving coffee and cakes.",
            "There is no cafe at {name}, but picnics are allowed in the grounds.",
            ("is there a cafe there", "can i get coffee at a cafe", "do they have a cafe", "is there a cafe inside"),
        ),
        "parking": (
            "Is there parking nearby?",
            "Yes, {name} has a visitor car park that costs two pounds.",
            "No, there is no parking at {name}, please use the park and ride.",
            ("can i drive there and find parking", "is there parking nearby", "is there parking for visitors", "do they have parking"),
        ),
    },
}

ENTITIES = {
    "hotel": [
        "Arc Hotel", "Arc Lodge", "Bridge Guesthouse", "Cityroomz", "Lovell Lodge", "Bridge Hotel",
        "Hamilton Lodge", "Warkworth House",
    ],
    "restaurant": [
        "Golden Wok", "Golden House", "The Copper Kettle", "Nandos", "The Cow Pizza Kitchen", "Copper Grill",
        "Curry Prince", "Bedouin Kitchen",
    ],
    "attraction": [
        "Kings College", "Kings Gallery", "Scudamores Punting", "Fitzwilliam Museum", "Cambridge Arts Theatre",
        "Fitzwilliam Park", "Byard Art", "Castle Galleries",
    ],
}

DOMAIN_NOUN = {"hotel": "hotel", "restaurant": "restaurant", "attraction": "attraction"}

OPENERS = {
    "hotel": ("i need a place to stay in the north", "i am looking for a hotel with good reviews", "can you find me somewhere to stay tonight"),
    "restaurant": ("i want to eat somewhere nice tonight", "can you recommend a restaurant in the centre", "i am looking for a place to have dinner"),
    "attraction": ("what is there to see in town", "i want to visit something interesting", "can you suggest an attraction in the centre"),
}

SYSTEM_OFFERS = (
    "{name} is a popular {noun} in the centre.",
    "how about {name}? it has great reviews.",
    "i would recommend {name}.",
)

# API/DB requests: not knowledge-seeking
API_REQUESTS = {
    "hotel": ("can you book a room for two nights", "what is the phone number", "please reserve it for three people", "what is the postcode", "how many stars does it have"),
    "restaurant": ("can you book a table for four at seven", "what is the address", "what type of food do they serve", "please make a reservation for tomorrow", "what price range is it"),
    "attraction": ("what is the entrance fee", "what is the address", "can i get the phone number", "what area is it in", "what type of attraction is it"),
}

SOURCE_TOPICS = {
    "hotel": {
        "safe": ("Is there a safe in the room?", "Yes, every room at {name} has a safe.", ("is there a safe for my valuables",)),
        "laundry": ("Do you have laundry service?", "{name} offers same day laundry service.", ("can i get my clothes washed",)),
        "smoking": ("Is smoking allowed?", "No, {name} is completely smoke free.", ("can i smoke in my room",)),
    },
    "restaurant": {
        "glutenfree": ("Do you have gluten free food?", "Yes, {name} has gluten free pasta.", ("can i eat gluten free there",)),
        "delivery": ("Do you deliver?", "{name} delivers within two miles.", ("do they offer delivery",)),
        "music": ("Is there live music?", "{name} has live jazz on fridays.", ("do they have live music",)),
    },
}
SOURCE_ENTITIES = {
    "hotel": ["Acorn Guest House", "Alexander Bed and Breakfast", "Ashley Hotel"],
    "restaurant": ["Curry Garden", "Pipasha Restaurant", "Saffron Brasserie"],
}


def make_store(
    n_domains: int = 3, n_entities: int = 4, n_docs: int = 5, seed: int = 0,
    entities: Optional[dict] = None, topics: Optional[dict] = None,
) -> KnowledgeStore:
    """Store with ids ``e_<i>`` / ``d_<j>``; bodies vary per entity (positive or negative answer)."""
    entities = entities or ENTITIES
    topics = topics or TOPICS
    rng = np.random.default_rng(seed)
    snippets = []
    for domain in list(topics)[:n_domains]:
        names = entities[domain][:n_entities]
        keys = list(topics[domain])[:n_docs]
        for e, name in enumerate(names, start=1):
            for d, key in enumerate(keys, start=1):
                spec = topics[domain][key]
                title, pos, neg = spec[0], spec[1], spec[2] if len(spec) > 3 else spec[1]
                body = (pos if rng.random() < 0.5 else neg).format(name=name)
                snippets.append(KnowledgeSnippet(domain, f"e_{e}", name, f"d_{d}", title, body))
    return KnowledgeStore(snippets)


def topic_of(store_topics: dict, snippet: KnowledgeSnippet) -> tuple:
    keys = list(store_topics[snippet.domain])
    return store_topics[snippet.domain][keys[int(snippet.doc_id.split("_")[1]) - 1]]


def seeking_dialogue(
    snippet: KnowledgeSnippet, rng: np.random.Generator, store: KnowledgeStore,
    topics: Optional[dict] = None, distractor_p: float = 0.3, name_in_query_p: float = 0.3,
) -> DialogueContext:
    """Opener, a system offer of the entity, then a paraphrased FAQ question."""
    topics = topics or TOPICS
    domain = snippet.domain
    queries = topic_of(topics, snippet)[3] if len(topic_of(topics, snippet)) > 3 else topic_of(topics, snippet)[2]
    turns = [Turn(Speaker.USER, OPENERS.get(domain, ("hello",))[int(rng.integers(len(OPENERS.get(domain, ("hello",)))))])]
    offer = SYSTEM_OFFERS[int(rng.integers(len(SYSTEM_OFFERS)))]
    turns.append(Turn(Speaker.SYSTEM, offer.format(name=snippet.entity_name, noun=DOMAIN_NOUN.get(domain, domain))))
    if rng.random() < distractor_p:
        others = [n for n in {s.entity_name for s in store if s.domain == domain} if n != snippet.entity_name]
        other = sorted(others)[int(rng.integers(len(others)))]
        turns.append(Turn(Speaker.USER, f"i also looked at {other} but it seemed too busy"))
        turns.append(Turn(Speaker.SYSTEM, f"{snippet.entity_name} is usually quieter."))
    q = queries[int(rng.integers(len(queries)))]
    if rng.random() < name_in_query_p:
        q = f"{q} at {snippet.entity_name}"
    turns.append(Turn(Speaker.USER, q + "?"))
    return DialogueContext(tuple(turns))


def api_dialogue(domain: str, name: str, rng: np.random.Generator) -> DialogueContext:
    openers = OPENERS.get(domain, ("hello",))
    offer = SYSTEM_OFFERS[int(rng.integers(len(SYSTEM_OFFERS)))]
    reqs = API_REQUESTS.get(domain, API_REQUESTS["hotel"])
    return DialogueContext((
        Turn(Speaker.USER, openers[int(rng.integers(len(openers)))]),
        Turn(Speaker.SYSTEM, offer.format(name=name, noun=DOMAIN_NOUN.get(domain, domain))),
        Turn(Speaker.USER, reqs[int(rng.integers(len(reqs)))] + "?"),
    ))


def written_response(snippet: KnowledgeSnippet) -> str:
    return snippet.body


def styled_response(snippet: KnowledgeSnippet) -> str:
    """Conversational style used by the style-transfer corpora and style-shifted test sets."""
    body = snippet.body.rstrip(".").lower()
    return f"{body}. is there anything else i can help you with?"


def sure_response(snippet: KnowledgeSnippet) -> str:
    """A second conversational style that opens every answer with "sure ,"."""
    return f"sure , {snippet.body.rstrip('.').lower()}."


def dialogue_corpus(
    store: KnowledgeStore, n: int, seed: int, positive_rate: float = 0.5,
    response=written_response, topics: Optional[dict] = None, **kwargs,
) -> Corpus:
    rng = np.random.default_rng(seed)
    contexts, labels = [], []
    for _ in range(n):
        snippet = store[int(rng.integers(len(store)))]
        if rng.random() < positive_rate:
            contexts.append(seeking_dialogue(snippet, rng, store, topics, **kwargs))
            labels.append(TurnLabel(True, snippet.ref, response(snippet)))
        else:
            contexts.append(api_dialogue(snippet.domain, snippet.entity_name, rng))
            labels.append(TurnLabel(False))
    return Corpus(contexts, labels, store.fingerprint())


def post_train_lines(store: KnowledgeStore) -> list[str]:
    """One question/answer line per snippet, naming the entity before the answer."""
    return [f"{s.title.rstrip('?')} at {s.entity_name}? {s.body}" if s.entity_name else f"{s.title} {s.body}" for s in store]


# ---- fixtures --------------------------------------------------------------

def fixture_store() -> KnowledgeStore:
    """3 domains x 4 entities x 5 docs."""
    return make_store(3, 4, 5, seed=7)


def source_store() -> KnowledgeStore:
    snippets = []
    for domain, topics in SOURCE_TOPICS.items():
        for e, name in enumerate(SOURCE_ENTITIES[domain], start=1):
            for d, (title, body, _) in enumerate(topics.values(), start=1):
                snippets.append(KnowledgeSnippet(domain, str(e), name, str(d), title, body.format(name=name)))
    return KnowledgeStore(snippets)


def source_corpus(seed: int = 9, n: int = 24) -> Corpus:
    store = source_store()
    rng = np.random.default_rng(seed)
    contexts, labels = [], []
    for i in range(n):
        snippet = store[int(rng.integers(len(store)))]
        if i % 2 == 0:
            title, body, queries = SOURCE_TOPICS[snippet.domain][list(SOURCE_TOPICS[snippet.domain])[int(snippet.doc_id) - 1]]
            openers = OPENERS[snippet.domain]
            turns = (
                Turn(Speaker.USER, openers[int(rng.integers(len(openers)))]),
                Turn(Speaker.SYSTEM, f"I found {snippet.entity_name} for you. Would you like to book it?"),
                Turn(Speaker.USER, f"Maybe. Does {snippet.entity_name} have good reviews?"),
                Turn(Speaker.SYSTEM, f"Yes, guests love {snippet.entity_name}."),
                Turn(Speaker.USER, queries[0].capitalize() + "?"),
            )
            contexts.append(DialogueContext(turns))
            labels.append(TurnLabel(True, snippet.ref, f"Let me check. {snippet.body}"))
        else:
            contexts.append(api_dialogue(snippet.domain, snippet.entity_name, rng))
            labels.append(TurnLabel(False))
    return Corpus(contexts, labels, store.fingerprint())


def eval_corpus(seed: int = 11, n: int = 30) -> Corpus:
    return dialogue_corpus(fixture_store(), n, seed, positive_rate=0.6)


# ---- benchmarks ------------------------------------------------------------

@dataclass
class SelectionBenchmark:
    store: KnowledgeStore
    train: Corpus
    test: Corpus


def selection_benchmark(
    seed: int = 0, n_train: int = 400, n_test: int = 300, distractor_p: float = 0.3, name_in_query_p: float = 0.3,
) -> SelectionBenchmark:
    """Confusable store: entity names share words, topics recur across entities and domains."""
    store = make_store(3, 8, 6, seed=1000 + seed)
    kw = dict(distractor_p=distractor_p, name_in_query_p=name_in_query_p)
    train = dialogue_corpus(store, n_train, 2000 + seed, positive_rate=1.0, **kw)
    test = dialogue_corpus(store, n_test, 3000 + seed, positive_rate=1.0, **kw)
    return SelectionBenchmark(store, train, test)


@dataclass
class DetectionBenchmark:
    train: Corpus
    test: Corpus


def detection_benchmark(seed: int = 0, n_train: int = 400, n_test: int = 200) -> DetectionBenchmark:
    store = make_store(3, 8, 6, seed=1000 + seed)
    return DetectionBenchmark(
        dialogue_corpus(store, n_train, 4000 + seed),
        dialogue_corpus(store, n_test, 5000 + seed),
    )


@dataclass
class GenerationBenchmark:
    store: KnowledgeStore
    post_train: list[str]
    fine_tune: list[GenExample]
    style: list[GenExample]
    held_out: list[GenExample]


def generation_benchmark(
    seed: int = 0, n_fine_tune: int = 300, n_style: int = 150, style=styled_response,
) -> GenerationBenchmark:
    """Fine-tune on written responses, restyle on a disjoint snippet set, test on a third.

    Queries name the entity. The post-training text has one question/answer
    line per knowledge snippet (held-out ones included, as an in-domain corpus
    would) plus user utterances.
    """
    store = make_store(3, 8, 6, seed=1000 + seed)
    rng = np.random.default_rng(6000 + seed)
    order = rng.permutation(len(store))
    third = len(store) // 3
    ft_ids, st_ids, ho_ids = order[:third], order[third : 2 * third], order[2 * third :]

    def examples(ids, n, respond, r):
        out = []
        for _ in range(n):
            s = store[int(ids[int(r.integers(len(ids)))])]
            ctx = seeking_dialogue(s, r, store, distractor_p=0.0, name_in_query_p=1.0)
            ctx = DialogueContext(ctx.turns[-1:])
            out.append(GenExample.from_snippet(ctx, s, respond(s)))
        return out

    fine_tune = examples(ft_ids, n_fine_tune, written_response, rng)
    style_set = examples(st_ids, n_style, style, rng)
    held_out = examples(ho_ids, len(ho_ids) * 2, style, rng)
    post_train = post_train_lines(store)
    post_train += [t.text for ex in fine_tune[:100] for t in ex.context.turns]
    return GenerationBenchmark(store, post_train, fine_tune, style_set, held_out)
