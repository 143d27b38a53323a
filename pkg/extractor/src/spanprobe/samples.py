"""A built-in fine-grained typed-entity sample: 20 types x 20 mentions.

Template sentences with one annotated entity each, in the style of
fine-grained NER benchmarks. Used to probe how well different model
internals separate entity types at small scale.
"""

from __future__ import annotations

from .corpusio import Doc, Span

ENTITY_TYPES: dict[str, list[str]] = {
    "dinosaur": [
        "Tyrannosaurus", "Velociraptor", "Triceratops", "Stegosaurus",
        "Brachiosaurus", "Allosaurus", "Diplodocus", "Spinosaurus",
        "Ankylosaurus", "Parasaurolophus", "Iguanodon", "Archaeopteryx",
        "Brontosaurus", "Pachycephalosaurus", "Compsognathus", "Gallimimus",
        "Carnotaurus", "Deinonychus", "Microraptor", "Protoceratops",
    ],
    "river": [
        "Amazon", "Nile", "Danube", "Mississippi", "Yangtze", "Volga",
        "Rhine", "Ganges", "Mekong", "Thames", "Seine", "Tigris",
        "Euphrates", "Zambezi", "Orinoco", "Loire", "Elbe", "Oder",
        "Indus", "Congo",
    ],
    "president": [
        "Washington", "Lincoln", "Jefferson", "Roosevelt", "Kennedy",
        "Madison", "Monroe", "Jackson", "Grant", "Truman", "Eisenhower",
        "Nixon", "Carter", "Reagan", "Clinton", "Obama", "Adams", "Polk",
        "Taft", "Hoover",
    ],
    "chemical element": [
        "hydrogen", "helium", "lithium", "carbon", "nitrogen", "oxygen",
        "sodium", "magnesium", "aluminium", "silicon", "phosphorus",
        "sulfur", "chlorine", "potassium", "calcium", "iron", "copper",
        "zinc", "silver", "gold",
    ],
    "programming language": [
        "Python", "Java", "Fortran", "Cobol", "Haskell", "Prolog", "Rust",
        "Kotlin", "Swift", "Ruby", "Perl", "Scala", "Erlang", "Elixir",
        "Julia", "Pascal", "Ada", "Lisp", "Scheme", "Smalltalk",
    ],
    "city": [
        "Paris", "London", "Tokyo", "Berlin", "Madrid", "Rome", "Vienna",
        "Prague", "Warsaw", "Lisbon", "Dublin", "Oslo", "Helsinki",
        "Athens", "Cairo", "Nairobi", "Sydney", "Toronto", "Chicago",
        "Boston",
    ],
    "composer": [
        "Mozart", "Beethoven", "Bach", "Chopin", "Brahms", "Schubert",
        "Handel", "Haydn", "Verdi", "Wagner", "Mahler", "Debussy", "Ravel",
        "Stravinsky", "Shostakovich", "Tchaikovsky", "Vivaldi", "Liszt",
        "Schumann", "Dvorak",
    ],
    "celestial body": [
        "Mercury", "Venus", "Mars", "Jupiter", "Saturn", "Uranus",
        "Neptune", "Pluto", "Europa", "Ganymede", "Callisto", "Titan",
        "Enceladus", "Triton", "Phobos", "Deimos", "Charon", "Ceres",
        "Eris", "Makemake",
    ],
    "bird": [
        "sparrow", "eagle", "falcon", "heron", "pelican", "albatross",
        "penguin", "ostrich", "flamingo", "toucan", "woodpecker",
        "kingfisher", "owl", "raven", "magpie", "swallow", "robin",
        "cardinal", "puffin", "cormorant",
    ],
    "mountain": [
        "Everest", "Kilimanjaro", "Denali", "Matterhorn", "Annapurna",
        "Makalu", "Elbrus", "Aconcagua", "Fuji", "Rainier", "Whitney",
        "Olympus", "Etna", "Vesuvius", "Teide", "Eiger", "Jungfrau",
        "Kangchenjunga", "Lhotse", "Manaslu",
    ],
    "medication": [
        "aspirin", "ibuprofen", "paracetamol", "penicillin", "amoxicillin",
        "insulin", "morphine", "codeine", "warfarin", "heparin",
        "metformin", "atorvastatin", "omeprazole", "prednisone",
        "lisinopril", "amlodipine", "gabapentin", "sertraline",
        "fluoxetine", "diazepam",
    ],
    "disease": [
        "influenza", "measles", "malaria", "cholera", "tuberculosis",
        "diabetes", "asthma", "arthritis", "hepatitis", "pneumonia",
        "bronchitis", "meningitis", "dengue", "rabies", "tetanus",
        "typhoid", "smallpox", "polio", "eczema", "anemia",
    ],
    "car maker": [
        "Toyota", "Honda", "Ford", "Volvo", "Porsche", "Ferrari", "Audi",
        "Subaru", "Mazda", "Nissan", "Peugeot", "Renault", "Fiat", "Skoda",
        "Hyundai", "Kia", "Chevrolet", "Cadillac", "Jaguar", "Bentley",
    ],
    "fruit": [
        "apple", "banana", "mango", "papaya", "guava", "cherry", "peach",
        "apricot", "plum", "grape", "kiwi", "pineapple", "watermelon",
        "cantaloupe", "raspberry", "blueberry", "strawberry", "blackberry",
        "pomegranate", "fig",
    ],
    "sport": [
        "football", "basketball", "tennis", "cricket", "rugby", "hockey",
        "volleyball", "badminton", "golf", "boxing", "wrestling", "judo",
        "karate", "fencing", "archery", "rowing", "cycling", "swimming",
        "skiing", "snowboarding",
    ],
    "language": [
        "English", "French", "Spanish", "German", "Italian", "Portuguese",
        "Russian", "Mandarin", "Japanese", "Korean", "Arabic", "Hebrew",
        "Hindi", "Bengali", "Turkish", "Greek", "Dutch", "Swedish",
        "Polish", "Czech",
    ],
    "technology company": [
        "Google", "Microsoft", "Apple", "Amazon", "Intel", "Nvidia",
        "Oracle", "Cisco", "Samsung", "Sony", "Siemens", "Nokia",
        "Ericsson", "Adobe", "Salesforce", "Spotify", "Netflix", "Airbnb",
        "Uber", "Zoom",
    ],
    "currency": [
        "dollar", "euro", "yen", "pound", "franc", "ruble", "rupee",
        "yuan", "won", "peso", "krona", "krone", "zloty", "forint",
        "dinar", "dirham", "shekel", "baht", "ringgit", "rand",
    ],
    "gemstone": [
        "diamond", "ruby", "sapphire", "emerald", "topaz", "opal",
        "amethyst", "garnet", "turquoise", "jade", "pearl", "aquamarine",
        "citrine", "peridot", "onyx", "obsidian", "malachite", "lapis",
        "moonstone", "zircon",
    ],
    "profession": [
        "teacher", "doctor", "nurse", "engineer", "lawyer", "architect",
        "plumber", "electrician", "carpenter", "baker", "butcher",
        "tailor", "journalist", "photographer", "librarian", "pharmacist",
        "surgeon", "dentist", "pilot", "farmer",
    ],
}

TEMPLATES = [
    "The report mentioned {} several times .",
    "Yesterday the article described {} in detail .",
    "Researchers discussed {} during the meeting .",
    "Many readers asked about {} last week .",
    "A new study focused on {} this year .",
]


def sample_corpus() -> list[Doc]:
    """One single-sentence document per (type, mention), span over the mention."""
    docs = []
    for t, (type_name, mentions) in enumerate(sorted(ENTITY_TYPES.items())):
        for m, surface in enumerate(mentions):
            template = TEMPLATES[m % len(TEMPLATES)]
            prefix = template.split("{}")[0]
            text = template.format(surface)
            start = len(prefix)
            docs.append(
                Doc(
                    doc_id=f"sample-{t:02d}-{m:02d}",
                    text=text,
                    spans=[Span("s0", start, start + len(surface), (type_name,))],
                )
            )
    return docs


def sample_queries() -> list[tuple[str, str, list[str]]]:
    rows = []
    for t, (type_name, mentions) in enumerate(sorted(ENTITY_TYPES.items())):
        relevant = [f"sample-{t:02d}-{m:02d}" for m in range(len(mentions))]
        rows.append((type_name, type_name, relevant))
    return rows
