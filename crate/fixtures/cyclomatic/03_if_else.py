def execute_command(video, possible_answers, question):
    # one decision, two branches
    frame = video.frame_from_index(0)
    if frame.exists('dog'):
        answer = 'yes'
    else:
        answer = 'no'
    return answer
