#!/usr/bin/env python3
"""Generate the bundled fixture data under data/.

Outputs:
  lexicon.json      frame inventory (frames -> lexical units)
  stories.jsonl     5-sentence template stories with lexical frame annotations
  demo_stories.jsonl  hand-written stories used by examples and service tests
  embeddings.txt    synthetic word vectors with planted per-frame clusters

Everything is seeded and deterministic. Run from the repository root.
"""
import json
import random
import re

random.seed(20220311)

# frame -> list of clusters; each cluster is a list of "lemma.pos" or
# "lemma.pos=variant|variant" entries. Clusters drive the synthetic embeddings.
FRAMES = {
    "Apply_heat": [["fry.v", "boil.v", "simmer.v", "heat.v"],
                   ["bake.v", "roast.v", "broil.v", "toast.v", "grill.v"],
                   ["cook.v"]],
    "Commerce_buy": [["buy.v=buy|buys|bought|buying", "purchase.v"],
                     ["purchase.n", "buyer.n"]],
    "Food": [["fruit.n", "apple.n", "vegetable.n", "pickle.n"],
             ["bread.n", "cake.n", "cookie.n", "pie.n"],
             ["pizza.n", "soup.n", "sandwich.n", "cheese.n", "egg.n"]],
    "Coming_to_believe": [["realize.v", "conclude.v", "deduce.v"],
                          ["discover.v", "figure out.v=figure out|figures out|figured out|figuring out",
                           "find out.v=find out|finds out|found out|finding out"]],
    "Cause_harm": [["hurt.v=hurt|hurts|hurting", "injure.v", "bruise.v"],
                   ["hit.v=hit|hits|hitting", "kick.v", "punch.v", "slap.v"]],
    "Request": [["ask.v", "request.v", "beg.v", "plead.v"],
                ["order.v", "urge.v", "call.v"]],
    "Contacting": [["call.v", "phone.v", "contact.v"], ["email.v", "text.v", "write to.v"]],
    "Collaboration": [["conspire.v", "conspiracy.n", "collusion.n", "collude.v"],
                      ["together.adv", "in league.a", "in cahoots.a"],
                      ["confederate.n"],
                      ["partner.n", "jointly.adv", "cooperation.n", "associate.n", "affiliated.a",
                       "team up.v=team up|teams up|teamed up|teaming up"]],
    "Ingestion": [["eat.v=eat|eats|ate|eaten|eating", "drink.v=drink|drinks|drank|drunk|drinking",
                   "feed.v=feed|feeds|fed|feeding"],
                  ["lunch.n", "breakfast.n", "snack.n", "dinner.n"],
                  ["swig.v", "quaff.v", "guzzle.v"],
                  ["munch.v", "feast.v", "devour.v"]],
    "Departing": [["depart.v", "departure.n", "exit.v", "leave.v=leave|leaves|left|leaving"],
                  ["vamoose.v", "decamp.v", "skedaddle.v"],
                  ["exodus.n", "disappearance.n", "escape.v"],
                  ["disappear.v", "vanish.v", "emerge.v"]],
    "Motion": [["go.v=go|goes|went|gone|going", "move.v", "travel.v"],
               ["walk.v", "run.v=run|runs|ran|running", "drive.v=drive|drives|drove|driven|driving"]],
    "Motion_directional": [["fall.v=fall|falls|fell|fallen|falling", "drop.v", "slip.v"],
                           ["climb.v", "rise.v=rise|rises|rose|risen|rising"]],
    "Desirability": [["good.a", "great.a", "best.a", "nice.a", "wonderful.a"],
                     ["bad.a", "terrible.a", "awful.a"]],
    "Cooking_creation": [["make.v=make|makes|made|making", "prepare.v", "whip up.v=whip up|whips up|whipped up|whipping up"],
                         ["concoct.v"]],
    "Emotion_directed": [["happy.a", "glad.a", "pleased.a", "proud.a"],
                         ["sad.a", "upset.a", "angry.a"]],
    "Text_creation": [["write.v=write|writes|wrote|written|writing", "compose.v", "draft.v"],
                      ["type.v", "pen.v", "letter.n"]],
    "Containers": [["jar.n", "bottle.n", "cup.n"], ["box.n=box|boxes", "bag.n", "basket.n", "bucket.n"]],
    "Kinship": [["mother.n", "father.n", "mom.n", "dad.n"],
                ["sister.n", "brother.n", "daughter.n", "son.n"],
                ["aunt.n", "uncle.n", "grandma.n"]],
    "Body_parts": [["knee.n", "leg.n", "foot.n=foot|feet", "toe.n"], ["arm.n", "hand.n", "head.n"]],
    "Temporal_collocation": [["today.adv", "now.adv", "then.adv"], ["tomorrow.adv", "yesterday.adv"]],
    "Calendric_unit": [["day.n", "week.n", "weekend.n", "month.n", "year.n"],
                       ["morning.n", "afternoon.n", "evening.n"]],
    "Social_event": [["party.n=party|parties", "celebration.n", "picnic.n"], ["wedding.n", "birthday.n"]],
    "Buildings": [["house.n", "building.n", "cabin.n"], ["tower.n", "castle.n", "church.n"]],
    "Locale_by_use": [["store.n", "market.n", "mall.n"], ["park.n", "school.n", "museum.n"]],
    "Perception_experience": [["see.v=see|sees|saw|seen|seeing", "notice.v"],
                              ["hear.v=hear|hears|heard|hearing", "feel.v=feel|feels|felt|feeling"]],
    "Deciding": [["decide.v", "decision.n"], ["choose.v=choose|chooses|chose|chosen|choosing"]],
    "Practice": [["practice.v", "rehearse.v"], ["train.v"]],
    "Fame": [["famous.a", "renowned.a"], ["celebrity.n", "fame.n"]],
    "Cardinal_numbers": [["one.num", "two.num", "three.num"], ["five.num", "twenty.num"]],
    "Education_teaching": [["study.v", "learn.v", "teach.v=teach|teaches|taught|teaching"],
                           ["lesson.n", "class.n=class|classes", "test.n"]],
    "Sleep": [["sleep.v=sleep|sleeps|slept|sleeping", "nap.v", "doze.v"]],
    "Precipitation": [["rain.v", "snow.v"], ["rain.n", "storm.n"]],
    "Getting": [["get.v=get|gets|got|gotten|getting", "receive.v", "obtain.v"],
                ["win.v=win|wins|won|winning", "earn.v"]],
    "Giving": [["give.v=give|gives|gave|given|giving", "donate.v", "hand.v"]],
    "Arriving": [["arrive.v", "reach.v", "return.v"], ["come.v=come|comes|came|coming"]],
    "Experiencer_focus": [["love.v", "like.v", "enjoy.v"], ["hate.v", "fear.v", "dislike.v"]],
    "Desiring": [["want.v", "wish.v", "hope.v"], ["crave.v", "desire.v"]],
    "Losing": [["lose.v=lose|loses|lost|losing", "misplace.v"]],
    "Locating": [["find.v=find|finds|found|finding", "locate.v"], ["spot.v"]],
    "Cause_to_fragment": [["break.v=break|breaks|broke|broken|breaking", "shatter.v"],
                          ["smash.v", "crack.v"]],
    "Vehicle": [["car.n", "bus.n=bus|buses", "truck.n"], ["bike.n", "boat.n", "train.n"]],
    "Personal_relationship": [["friend.n", "neighbor.n"],
                              ["wife.n=wife|wives", "husband.n", "boyfriend.n", "girlfriend.n"]],
    "Attempt": [["try.v", "attempt.v"]],
    "Placing": [["put.v=put|puts|putting", "place.v", "pack.v"], ["store.v", "stash.v"]],
    "Self_motion": [["dance.v", "swim.v=swim|swims|swam|swimming", "jog.v"], ["hike.v", "stroll.v"]],
    "Waiting": [["wait.v", "await.v"]],
    "Chemical-sense_description": [["delicious.a", "tasty.a", "sour.a", "sweet.a"]],
    "Searching_scenario": [["search.v", "look for.v=look for|looks for|looked for|looking for"], ["hunt.v"]],
    "Opening": [["open.v", "unlock.v"]],
    "Commerce_pay": [["pay.v=pay|pays|paid|paying", "spend.v=spend|spends|spent|spending"]],
    "Cause_to_make_noise": [["laugh.v", "giggle.v"], ["shout.v", "yell.v"]],
}


def parse_entry(entry):
    head, _, forms = entry.partition("=")
    lemma, pos = head.rsplit(".", 1)
    variants = forms.split("|") if forms else []
    return lemma, pos, variants


def write_lexicon():
    frames = []
    for name, clusters in FRAMES.items():
        lus = []
        for cluster in clusters:
            for entry in cluster:
                lemma, pos, variants = parse_entry(entry)
                lu = {"lemma": lemma, "pos": pos}
                if variants:
                    lu["variants"] = variants
                    lu["regular"] = False
                lus.append(lu)
        frames.append({"name": name, "lexical_units": lus})
    with open("data/lexicon.json", "w") as f:
        json.dump({"frames": frames}, f, indent=1)
        f.write("\n")


# --- inflection, mirrors the rule-based inflector closely enough for annotation

VOWELS = set("aeiou")


def inflect(lemma, pos, variants):
    out = {lemma}
    out.update(variants)
    if variants or " " in lemma:
        return out
    if pos == "v":
        if lemma.endswith("e"):
            out |= {lemma + "s", lemma + "d", lemma[:-1] + "ing"}
        elif lemma.endswith("y") and lemma[-2] not in VOWELS:
            out |= {lemma[:-1] + "ies", lemma[:-1] + "ied", lemma + "ing"}
        elif re.search(r"(s|x|z|ch|sh)$", lemma):
            out |= {lemma + "es", lemma + "ed", lemma + "ing"}
        else:
            stem = lemma
            if (len(lemma) >= 3 and lemma[-1] not in VOWELS | set("wxy")
                    and lemma[-2] in VOWELS and lemma[-3] not in VOWELS
                    and sum(c in VOWELS for c in lemma) == 1):
                stem = lemma + lemma[-1]
            out |= {lemma + "s", stem + "ed", stem + "ing"}
    elif pos == "n":
        if re.search(r"(s|x|z|ch|sh)$", lemma):
            out.add(lemma + "es")
        elif lemma.endswith("y") and lemma[-2] not in VOWELS:
            out.add(lemma[:-1] + "ies")
        else:
            out.add(lemma + "s")
    return out


def build_trigger_table():
    table = []
    for name, clusters in FRAMES.items():
        forms = set()
        for cluster in clusters:
            for entry in cluster:
                lemma, pos, variants = parse_entry(entry)
                forms |= inflect(lemma, pos, variants)
        table.append((name, sorted(forms)))
    return table


TRIGGERS = build_trigger_table()


def annotate(sentence):
    """Lexical stand-in for a frame parser: frames in first-trigger order."""
    low = sentence.lower()
    hits = []
    for name, forms in TRIGGERS:
        best = None
        for form in forms:
            for m in re.finditer(r"(?<![a-z])" + re.escape(form) + r"(?![a-z])", low):
                if best is None or m.start() < best[0]:
                    best = (m.start(), m.end())
                break
        if best is not None:
            hits.append((best[0], best[1], "[" + name + "]"))
    hits.sort()
    return [h[2] for h in hits], [[h[2], h[0], h[1]] for h in hits]


# --- story templates

NAMES = [("Charles", "he"), ("Alice", "she"), ("Bob", "he"), ("Emma", "she"), ("Ari", "he"),
         ("Mary", "she"), ("Tom", "he"), ("Lucy", "she"), ("Sam", "he"), ("Kate", "she"),
         ("Jake", "he"), ("Nina", "she"), ("Alec", "he"), ("Rosa", "she"), ("Ben", "he"),
         ("Ella", "she"), ("Greg", "he"), ("Ivy", "she"), ("Max", "he"), ("Zoe", "she")]
FOODS = ["fruit", "bread", "apples", "cheese", "soup", "pizza", "cookies", "vegetables", "eggs", "pie"]
STORES = ["store", "market", "mall", "grocery store"]
KIN = ["mother", "father", "sister", "brother", "aunt", "uncle", "grandma", "mom", "dad"]
BODY = ["knee", "arm", "leg", "hand", "toe", "head", "foot"]
HAPPY = ["happy", "glad", "pleased", "proud"]
GOOD = ["good", "great", "wonderful", "nice"]
UNITS = ["day", "week", "month", "weekend"]
TIMES = ["morning", "afternoon", "evening"]
CITIES = ["Paris", "Rome", "London", "Boston", "Tokyo"]
PLACES = ["park", "museum", "school", "beach", "lake"]
VEHICLES = ["car", "bus", "bike", "truck"]
CONTAINERS = ["jar", "box", "bag", "basket", "bottle"]

PLOTS = [
    [["{N} went shopping.", "{N} went to the {store}.", "{N} needed some {food}."],
     ["{P} bought {food}.", "{P} bought some {food} and {food2}.", "{P} purchased a bag of {food}."],
     ["Then {p} left.", "Then {p} drove home.", "{P} walked back to {pos} house."],
     ["{P} cooked the {food} for {pos} {kin}.", "{P} made dinner for {pos} {kin}."],
     ["{Pos} {kin} was {happy}.", "They ate the {food} together.", "The meal was {good}."]],
    [["{N} wanted to make a cake for {pos} {kin}.", "{N} wanted to bake a cake."],
     ["{P} bought flour and sugar at the {store}.", "{P} went to the {store} for eggs."],
     ["{P} baked the cake in the oven.", "That {time}, {p} baked the cake."],
     ["The party was {good}.", "{P} gave the cake to {pos} {kin}."],
     ["Everyone ate the cake and was {happy}.", "{P} made the best cake {p} ever had."]],
    [["{N} slipped on a banana peel.", "{N} was running in the {place}."],
     ["{P} fell down on the ground.", "{P} fell and hit {pos} {body}."],
     ["{P} hurt {pos} {body} badly.", "{P} injured {pos} {body}."],
     ["{Pos} {kin} called the doctor.", "{Pos} {kin} drove {obj} to the hospital."],
     ["{P} had to rest for a {unit}.", "{P} felt better the next {unit}."]],
    [["{N} spent twenty dollars a day on pickles.", "{N} loved pickles."],
     ["{P} decided to make {pos} own.", "{P} wanted to save money."],
     ["{P} put the pickles in a {container}.", "{P} puts the pickles in brine."],
     ["{P} waited one {unit}.", "{P} waited two weeks for the pickles to get sour."],
     ["The pickles were delicious.", "{N} opened the {container} to find perfect pickles."]],
    [["{N} loved writing.", "{N} wanted to be a writer."],
     ["{P} decided to enter a contest.", "{P} decided to write a book."],
     ["{P} practiced every day.", "{P} wrote every {time}."],
     ["{P} wrote a short story.", "{P} wrote a letter to a publisher."],
     ["{P} became famous.", "Now {p} is a famous author.", "{P} was very {happy}."]],
    [["{N} went to {city}.", "{N} traveled to {city} for a {unit}."],
     ["{P} went to see the museum.", "{P} visited the old castle."],
     ["{P} saw many paintings.", "{P} saw the tower from the street."],
     ["{P} walked to the tower.", "{P} ate lunch at a small cafe."],
     ["It was the best day of {pos} life.", "{P} was sad to leave."]],
    [["{N} and {N2} teamed up for a project.", "{N} and {N2} worked on a project."],
     ["They worked together every {time}.", "They met at the {place} every day."],
     ["{N2} wrote the report.", "{N2} wrote the first draft."],
     ["{N} made the poster.", "{N} drew the pictures."],
     ["Their teacher was {happy}.", "They got a {good} grade."]],
    [["{N} was tired of the party.", "{N} was at a party."],
     ["{P} decided to leave early.", "{P} wanted to go home."],
     ["{P} said goodbye to {pos} friend.", "{P} left without a word."],
     ["{P} drove home in the rain.", "{P} walked home in the rain."],
     ["{P} went to sleep right away.", "{P} slept until the next {time}."]],
    [["{N} could not find {pos} keys.", "{N} lost {pos} keys."],
     ["{P} looked in every room.", "{P} searched the whole house."],
     ["{P} realized they were in {pos} {vehicle}.", "{P} found them in {pos} {vehicle}."],
     ["{P} laughed at the mistake.", "{P} felt silly."],
     ["{P} was {happy} to find them.", "{P} drove to work."]],
    [["{N} broke {pos} friend's toe while dancing.", "{N} danced badly at the party."],
     ["{P} felt terrible.", "{P} was very sad."],
     ["{Pos} friend asked {obj} to stay home.", "The next weekend, {p} was asked to stay home."],
     ["{N} called to apologize.", "{N} wrote a letter to {pos} friend."],
     ["They were friends again.", "{Pos} friend was {happy} again."]],
    [["{N} was hungry after school.", "{N} woke up hungry."],
     ["{P} fried some eggs.", "{P} made a sandwich."],
     ["{P} boiled water for tea.", "{P} toasted some bread."],
     ["{P} ate lunch with {pos} {kin}.", "{P} ate breakfast with {pos} {kin}."],
     ["The meal was {good}.", "{P} felt much better."]],
    [["{N} lost {pos} dog in the {place}.", "{Pos} dog ran away."],
     ["{P} asked {pos} neighbor for help.", "{P} called {pos} {kin} for help."],
     ["They searched all {time}.", "They looked for the dog for hours."],
     ["{P} found the dog near the lake.", "They found the dog at the {place}."],
     ["{N} was so {happy}.", "{N} gave the dog a treat."]],
    [["{N} had a big test tomorrow.", "{N} had a test at school."],
     ["{P} studied all {time}.", "{P} studied with {pos} {kin}."],
     ["{P} slept for only a few hours.", "{P} went to sleep early."],
     ["{P} took the test in the morning.", "{P} was nervous during the test."],
     ["{P} got a {good} grade.", "{P} was {happy} with the result."]],
    [["{N} planned a picnic with {pos} family.", "{N} wanted to have a picnic."],
     ["{P} packed sandwiches in a {container}.", "{P} put food in a basket."],
     ["They drove to the {place}.", "They went to the {place} by {vehicle}."],
     ["Suddenly it started to rain.", "It began to rain."],
     ["They ate in the {vehicle} instead.", "They went home and ate inside."]],
    [["{N} wanted a new {vehicle}.", "{N} saved money for a {vehicle}."],
     ["{P} worked hard every {unit}.", "{P} got a job at the {store}."],
     ["{P} finally had enough money.", "After a year, {p} had enough money."],
     ["{P} bought a new {vehicle}.", "{P} paid for the {vehicle} in cash."],
     ["{P} drove it home {happy}.", "{P} loved {pos} new {vehicle}."]],
    [["{N} wanted to learn to swim.", "{N} could not swim."],
     ["{Pos} {kin} took {obj} to the lake.", "{P} went to a swim class."],
     ["{P} practiced every {time}.", "{P} tried very hard."],
     ["Soon {p} could swim across the lake.", "After a {unit}, {p} could swim."],
     ["{P} was very {happy}.", "{Pos} {kin} was proud of {obj}."]],
]


def fill(template, ctx):
    return template.format(**ctx)


def make_story():
    plot = random.choice(PLOTS)
    name, p = random.choice(NAMES)
    other = random.choice([n for n in NAMES if n[0] != name])[0]
    food, food2 = random.sample(FOODS, 2)
    ctx = {
        "N": name, "N2": other, "p": p, "P": p.capitalize(),
        "pos": "his" if p == "he" else "her", "Pos": "His" if p == "he" else "Her",
        "obj": "him" if p == "he" else "her",
        "food": food, "food2": food2, "store": random.choice(STORES),
        "kin": random.choice(KIN), "body": random.choice(BODY), "happy": random.choice(HAPPY),
        "good": random.choice(GOOD), "unit": random.choice(UNITS), "time": random.choice(TIMES),
        "city": random.choice(CITIES), "place": random.choice(PLACES),
        "vehicle": random.choice(VEHICLES), "container": random.choice(CONTAINERS),
    }
    sentences = [fill(random.choice(slot), ctx) for slot in plot]
    return sentences


def write_stories(n=900):
    seen = set()
    records = []
    while len(records) < n:
        sentences = make_story()
        key = " ".join(sentences)
        if key in seen:
            continue
        seen.add(key)
        frames, spans = [], []
        for s in sentences:
            f, sp = annotate(s)
            frames.append(f)
            spans.append(sp)
        rec = {}
        if random.random() < 0.7:
            words = re.findall(r"[A-Za-z]+", sentences[0])
            rec["title"] = " ".join(w.capitalize() for w in words[-2:])
        rec["sentences"] = sentences
        rec["frames"] = frames
        rec["spans"] = spans
        records.append(rec)
    with open("data/stories.jsonl", "w") as f:
        for rec in records:
            f.write(json.dumps(rec) + "\n")


DEMO = [
    ["Charles went shopping.", "He bought fruit.", "Then he left.",
     "He cooked the fruit for his mother.", "His mother was happy."],
    ["Alec's daughter wanted more blocks to play with.",
     "Alec figured that blocks would develop her scientific mind.",
     "Alec bought blocks with letters on them.",
     "Alec's daughter made words with them rather than structures.",
     "Alec was happy to see her developing her verbal ability."],
    ["I went to a dance party.", "I danced terribly and broke a friend's toe.",
     "The next weekend, I was asked to please stay home.", "I felt terrible.",
     "We are still friends."],
    ["Ari spends $20 a day on pickles.", "He decides to make his own to save money.",
     "He puts the pickles in brine.", "Ari waits 2 weeks for his pickles to get sour.",
     "Ari opens the jar to find perfect pickles."],
]
# parser output as reported for the worked examples; remaining sentences use the
# lexical annotator
DEMO_OVERRIDES = {
    (0, 1): ["[Commerce_buy]", "[Food]"],
    (1, 2): ["[Containers]"],
    (1, 3): ["[Text_creation]"],
    (1, 4): ["[Emotion_directed]"],
    (2, 2): ["[Request]"],
}


def write_demo():
    with open("data/demo_stories.jsonl", "w") as f:
        for i, sentences in enumerate(DEMO):
            frames = []
            for j, s in enumerate(sentences):
                frames.append(DEMO_OVERRIDES.get((i, j)) or annotate(s)[0])
            f.write(json.dumps({"sentences": sentences, "frames": frames}) + "\n")


def write_embeddings(dim=16):
    rng = random.Random(7)
    vectors = {}
    frame_centers = {}
    for name, clusters in FRAMES.items():
        frame_centers[name] = [rng.gauss(0, 3.0) for _ in range(dim)]
        for cluster in clusters:
            center = [c + rng.gauss(0, 2.0) for c in frame_centers[name]]
            for entry in cluster:
                lemma, _, _ = parse_entry(entry)
                words = lemma.split()
                for w in words:
                    if w in vectors:
                        continue
                    vectors[w] = [c + rng.gauss(0, 0.15) for c in center]
    # confederate is deliberately left out: exercises the unembeddable path
    vectors.pop("confederate", None)
    for filler in ["the", "a", "he", "she", "went", "to", "and", "of"]:
        vectors.setdefault(filler, [rng.gauss(0, 1.0) for _ in range(dim)])
    with open("data/embeddings.txt", "w") as f:
        for w in sorted(vectors):
            f.write(w + " " + " ".join(f"{x:.5f}" for x in vectors[w]) + "\n")


if __name__ == "__main__":
    write_lexicon()
    write_stories()
    write_demo()
    write_embeddings()
