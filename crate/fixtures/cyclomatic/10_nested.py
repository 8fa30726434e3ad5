def execute_command(video, possible_answers, question):
    count = 0
    for frame in video.frame_iterator():
        for patch in frame.find('person'):
            if patch.exists('hat') and patch.verify_property('hat', 'red'):
                count += 1
                break
    while count > 3:
        count -= 1
    return count
